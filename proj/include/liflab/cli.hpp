#pragma once

namespace liflab::cli {

// Entry point of the command-line tool, kept inside the library so tests can
// drive it in-process with synthetic argv arrays.  Returns the process exit
// code: 0 on success (a reported divergence of the solved equation is a
// valid scientific outcome, not a failure), 2 on invalid input, 3 on a
// numeric failure.
int run(int argc, const char* const* argv);

}  // namespace liflab::cli
