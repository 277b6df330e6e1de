#include "texyz/cli.hpp"

int main(int argc, char** argv) { return texyz::cli::run(argc, argv); }
