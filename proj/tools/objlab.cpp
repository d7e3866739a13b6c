#include "objlab/cli.hpp"

int main(int argc, char** argv) { return objlab::cli::run(argc, argv); }
