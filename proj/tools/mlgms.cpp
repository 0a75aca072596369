#include "mlgms/harness/cli.hpp"

int main(int argc, char** argv) { return mlgms::cli_main(argc, argv); }
