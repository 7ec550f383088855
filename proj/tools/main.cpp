#include "mgmn/cli.hpp"

int main(int argc, char** argv) { return mgmn::cli::run(argc, argv); }
