#include "chimera/cli.hpp"

int main(int argc, char** argv) { return chimera::cli::run(argc, argv); }
