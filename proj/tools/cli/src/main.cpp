#include "lipcert_cli/cli.hpp"

int main(int argc, char** argv) { return lipcert::cli::dispatch(argc, argv); }
