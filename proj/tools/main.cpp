#include "respore/cli.hpp"

int main(int argc, char** argv) { return respore::run_cli(argc, argv); }
