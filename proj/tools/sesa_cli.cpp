#include "sesa/app.hpp"

int main(int argc, char** argv) { return sesa::run_cli(argc, argv); }
