#include "fedsubsel/cli.hpp"

int main(int argc, char** argv) { return fedsubsel::cli::main(argc, argv); }
