#include "customs/cli.hpp"

int main(int argc, char** argv) { return customs::run_cli(argc, argv); }
