#include "amod/cli.hpp"

int main(int argc, char** argv) { return amod::run_cli(argc, argv); }
