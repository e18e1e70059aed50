#include "homlab/runner.hpp"

int main(int argc, char** argv) { return homlab::runner::run_cli(argc, argv); }
