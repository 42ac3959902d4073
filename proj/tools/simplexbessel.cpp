#include "simplexbessel/cli.hpp"

int main(int argc, char** argv) { return simplexbessel::cli::main_entry(argc, argv); }
