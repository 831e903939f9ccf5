#include "krvortex/cli.hpp"

int main(int argc, char **argv) { return krv::cli::run(argc, argv); }
