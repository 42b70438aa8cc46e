#include "cli_io.hpp"

int main(int argc, char** argv) { return debias_cli::main_entry(argc, argv); }
