#pragma once

#include <iosfwd>

namespace flr {

// Exit codes: 0 success, 1 usage or config error, 2 numerical failure, 3 property violation.
// Failures write one JSON line {"error": {"code", "reason", "detail"}} to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace flr
