#include "dtpa/cli.hpp"

int main(int argc, char** argv) { return dtpa::cli::run(argc, argv); }
