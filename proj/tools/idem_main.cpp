#include "idem/cli.hpp"

int main(int argc, char** argv) { return idem::cli_main(argc, argv); }
