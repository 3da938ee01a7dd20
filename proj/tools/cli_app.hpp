#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hrmm::cli {

/// Runs one command; `args` excludes the program name. Returns the process exit code:
/// 0 ok, 2 config error, 3 numerical error, 4 I/O error. Failures print an error JSON
/// object {code, module, message, context} on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hrmm::cli
