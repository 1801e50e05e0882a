#include "liflab/cli.hpp"

int main(int argc, char** argv) { return liflab::cli::run(argc, argv); }
