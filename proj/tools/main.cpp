#include "cli.hpp"

int main(int argc, char** argv) { return cotprobe::cli::run_cli(argc, argv); }
