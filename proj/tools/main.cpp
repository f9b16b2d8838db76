#include "strata/cli.hpp"

int main(int argc, char** argv) { return strata::cli_main(argc, argv); }
