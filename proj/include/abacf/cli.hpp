#pragma once

// Command-line front end: track, eval, overlay and make-toy.
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <ostream>

namespace abacf::cli {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace abacf::cli
