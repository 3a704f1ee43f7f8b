#pragma once

#include <ostream>

namespace nscheme::cli {

/// Runs the command line tool. Data goes to `out` (or to the --out file), diagnostics to `err`.
/// Returns 0 on success, 1 on validation errors, 2 on solver errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nscheme::cli
