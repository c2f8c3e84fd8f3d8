#include "cli.hpp"

int main(int argc, char** argv) { return imchaos::cli::run(argc, argv); }
