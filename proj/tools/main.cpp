#include "sast/cli.hpp"

int main(int argc, char** argv) { return sast::cli::run(argc, argv); }
