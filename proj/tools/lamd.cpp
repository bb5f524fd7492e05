#include "lamd/cli/commands.hpp"

int main(int argc, char** argv) { return lamd::cli::run(argc, argv); }
