#pragma once

namespace mgsim::cli {

// Exit codes: 0 success, 1 input/validation error, 2 numerical failure.
int run(int argc, char** argv);

}  // namespace mgsim::cli
