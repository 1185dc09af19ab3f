#include "cli.hpp"

int main(int argc, char** argv) { return msdem::cli::main(argc, argv); }
