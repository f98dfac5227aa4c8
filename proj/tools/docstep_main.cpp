#include "docstep/cli.hpp"

int main(int argc, char** argv) { return docstep::cli::run(argc, argv); }
