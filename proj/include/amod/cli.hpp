#pragma once

#include <string>
#include <vector>

namespace amod {

/// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure
/// (including any hard error recorded by a stage).
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

int run_cli(int argc, char** argv);
/// Same as run_cli with args[0] as the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace amod
