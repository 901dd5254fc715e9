#include "rarefx/cli.hpp"

int main(int argc, char** argv) { return rarefx::cli::run_command(argc, argv); }
