#include "insertrank/cli.hpp"

int main(int argc, char** argv) { return insertrank::cli::main(argc, argv); }
