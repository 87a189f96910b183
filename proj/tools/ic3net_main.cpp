#include "ic3net/cli/commands.hpp"

int main(int argc, char** argv) { return ic3net::cli::main(argc, argv); }
