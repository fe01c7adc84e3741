#include "zslforge/cli.hpp"

int main(int argc, char** argv) { return zslforge::run_cli(argc, argv); }
