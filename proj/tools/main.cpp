#include "ganlab/cli.hpp"

int main(int argc, char** argv) { return ganlab::cli::run_command(argc, argv); }
