#include "peq/bench.hpp"

int main(int argc, char** argv) { return peq::bench::run_cli(argc, argv); }
