#include "cli.hpp"

int main(int argc, char **argv) { return dtn::cli::run(argc, argv); }
