#include "spathmm/cli.hpp"

int main(int argc, char** argv) { return spathmm::run_cli(argc, argv); }
