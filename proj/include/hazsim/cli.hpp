#pragma once

#include <ostream>

namespace hazsim::cli {

/// Run one CLI invocation. argv follows main() conventions (argv[0] is the
/// program name). Diagnostics go to err, results to out or output-file flags.
/// Exit codes: 0 success, 1 validation errors present, 2 parse/usage error,
/// 3 runtime failure (all runs failed).
int dispatch(int argc, const char* const* argv, std::ostream& out,
             std::ostream& err);

} // namespace hazsim::cli
