#include "periodwave/cli.hpp"

int main(int argc, char** argv) { return periodwave::run_cli(argc, argv); }
