#include "satq/cli.hpp"

int main(int argc, char** argv) { return satq::cli_dispatch(argc, argv); }
