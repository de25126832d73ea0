#include "satrefine/cli.hpp"

int main(int argc, char** argv) { return satrefine::run_cli(argc, argv); }
