#include "foct/cli.hpp"

int main(int argc, char** argv) { return foct::run_cli(argc, argv); }
