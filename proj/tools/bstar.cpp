#include "bstar/cli.hpp"

int main(int argc, char** argv) { return bstar::cli::main(argc, argv); }
