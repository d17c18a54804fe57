#include "xferlab/cli.hpp"

int main(int argc, char** argv) { return xferlab::cli_main(argc, argv); }
