#include "qlsr/cli.hpp"

int main(int argc, char** argv) { return qlsr::cli::run(argc, argv); }
