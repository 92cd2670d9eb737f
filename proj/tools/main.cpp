#include "cli/commands.hpp"

int main(int argc, char** argv) { return trajkit::cli::run(argc, argv); }
