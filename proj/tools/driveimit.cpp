#include "driveimit/cli.hpp"

int main(int argc, char** argv) { return driveimit::run_cli(argc, argv); }
