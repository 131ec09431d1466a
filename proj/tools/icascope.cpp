#include "icascope/cli.hpp"

int main(int argc, char** argv) { return icascope::cli::run(argc, argv); }
