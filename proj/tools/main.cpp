#include "s2st/cli.hpp"

int main(int argc, char** argv) { return s2st::dispatch(argc, argv); }
