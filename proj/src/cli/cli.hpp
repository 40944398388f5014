#pragma once

#include <string>
#include <vector>

namespace omnivl::cli {

// Exit codes: 0 success, 2 usage/config error, 3 runtime failure.
int run(const std::vector<std::string>& args);

}  // namespace omnivl::cli
