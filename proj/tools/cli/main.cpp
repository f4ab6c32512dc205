#include "app.hpp"

int main(int argc, char** argv) { return mgsim::cli::run(argc, argv); }
