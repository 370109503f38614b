#include "selnet/cli.hpp"

int main(int argc, char** argv) { return selnet::cli::run(argc, argv); }
