#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace qqlab::cli {

// Default output root: $QQLAB_OUTPUT_DIR, else ./qqlab_out.
std::filesystem::path output_root();

// One qqlab invocation. args excludes the program name. Returns the exit
// code: 0 success, 2 validation error, 3 missing records, 4 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qqlab::cli
