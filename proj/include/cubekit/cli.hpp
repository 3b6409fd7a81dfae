#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cubekit::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2 };

/// Entry point shared by the `cubekit` binary and the tests. args[0] is the
/// program name. Diagnostics go to `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Directory holding the shipped data files (roots, published tables).
std::string data_dir();

}  // namespace cubekit::cli
