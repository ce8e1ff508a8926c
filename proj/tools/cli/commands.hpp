#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace clfp::cli {

// Exit codes: 0 success, 1 operational error, 2 verification failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerification = 2;

// Runs one command line (without the program name), e.g.
// {"train", "--data", "d/", "--out", "runs/a"}.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace clfp::cli
