#include "cli.hpp"

int main(int argc, char** argv) { return ddn::cli::run(argc, argv); }
