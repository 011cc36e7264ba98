#include "mfband/cli.hpp"

int main(int argc, char** argv) { return mfband::run_cli(argc, argv); }
