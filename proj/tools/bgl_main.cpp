#include "bgl/cli.hpp"

int main(int argc, char** argv) { return bgl::cli::run(argc, argv); }
