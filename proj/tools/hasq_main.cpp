#include "commands.hpp"

int main(int argc, char** argv) { return hasq::cli::run(argc, argv); }
