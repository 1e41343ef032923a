#include "cli.hpp"

int main(int argc, char** argv) { return cabs_eval::cli::run(argc, argv); }
