#pragma once

#include <iosfwd>

namespace mxbolo {

inline constexpr const char* kToolVersion = "0.1.0";

/// Command-line entry point. Exit codes: 0 success, 1 user error (bad
/// arguments, config or input files), 2 runtime or solver failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mxbolo
