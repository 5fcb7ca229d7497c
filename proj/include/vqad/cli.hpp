#pragma once

#include <string>
#include <vector>

namespace vqad::cli {

/// Parses and runs one subcommand. Exit codes: 0 success, 1 runtime failure
/// (single machine-parsable `error[<category>]: ...` line on stderr),
/// 2 usage error.
int dispatch(int argc, const char* const* argv);
int dispatch(const std::vector<std::string>& args);

}  // namespace vqad::cli
