#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hsd::cli {

// Parses arguments (without the program name) and runs one subcommand.
// Returns the process exit code: 0 on success, 2 on usage errors, 1 otherwise.
// Errors are written to `err` as one JSON object {"error": code, "message": text}.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace hsd::cli
