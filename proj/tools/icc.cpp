#include "icc/cli/app.hpp"

int main(int argc, char** argv) { return icc::cli::run(argc, argv); }
