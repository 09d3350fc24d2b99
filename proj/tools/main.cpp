#include "cli.hpp"

int main(int argc, char** argv) { return recprompt::cli::run(argc, argv); }
