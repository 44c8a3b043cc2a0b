#include "cli.hpp"

int main(int argc, char** argv) { return qonet::cli::run(argc, argv); }
