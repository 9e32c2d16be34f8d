#pragma once

#include <ostream>

namespace qcmap::cli {

// Exit codes: 0 success, 1 solver or validation failure (JSON envelope on err),
// 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace qcmap::cli
