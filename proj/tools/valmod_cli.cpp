#include "valmod/commands.hpp"

int main(int argc, char **argv) { return valmod::cli::run(argc, argv); }
