#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "doubling/grid.hpp"
#include "doubling/set_json.hpp"

namespace doubling {

struct Artifact {
  std::string path;
  std::string content;
};

/// Result of one subcommand: `result` is the hashed, reproducible content; artifacts are files to
/// write; text goes to stdout.
struct Outcome {
  Json result;
  int exit_code = 0;
  std::vector<Artifact> artifacts;
  std::string text;
};

/// Runs a subcommand from its fully resolved config (the same object stored in the journal).
/// `grid` short-circuits building the grid named in the config.
Outcome execute(const std::string& subcommand, const Json& config, const GridPtr& grid = nullptr);

/// FNV-1a 64 of the compact JSON dump, as 16 hex digits.
std::string result_hash(const Json& result);

/// Exit codes: 0 success, 1 property failure, 2 argument or I/O error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Write-to-temp then rename.
void write_atomic(const std::string& path, const std::string& content);

}  // namespace doubling
