#include "kinflow/cli.hpp"

int main(int argc, char** argv) { return kinflow::run_cli(argc, argv); }
