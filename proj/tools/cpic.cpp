#include "cpic/cli.hpp"

int main(int argc, char** argv) { return cpic::cli::run(argc, argv); }
