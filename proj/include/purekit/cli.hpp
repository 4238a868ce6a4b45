#pragma once

#include <string>
#include <vector>

namespace purekit {

// Entry point behind the `purekit` binary; args exclude argv[0].
// Exit codes: 0 success, 2 usage error, 3 config error, 4 runtime failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace purekit
