#include "commands.hpp"

int main(int argc, char** argv) { return resdiff::cli::cli_main(argc, argv); }
