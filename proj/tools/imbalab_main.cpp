#include "imbalab/cli.hpp"

int main(int argc, char** argv) { return imbalab::cli::run_cli(argc, argv); }
