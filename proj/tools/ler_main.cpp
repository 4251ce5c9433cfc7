#include "ler/cli.hpp"

int main(int argc, char** argv) { return ler::cli::cli_run(argc, argv); }
