#include "spt/cli.hpp"

int main(int argc, char** argv) { return spt::cli_dispatch(argc, argv); }
