#include "spv/cli.hpp"

int main(int argc, char** argv) { return spv::cli::main(argc, argv); }
