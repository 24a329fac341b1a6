#pragma once

// Command-line front end. `execute` parses arguments, dispatches to the
// library and collects everything into a Report; `run` also prints it.

#include <json.hpp>

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace ncjoin {

enum ExitStatus : int {
  kExitOk = 0,
  kExitInvariantViolation = 1,
  kExitMalformedInput = 2,
  kExitInconclusive = 3,
};

struct Report {
  /// Command words, e.g. "joinings disjoint".
  std::string command;
  std::vector<std::string> arguments;
  /// Input path -> FNV-1a digest of its bytes.
  std::map<std::string, std::string> inputs;
  nlohmann::json results = nlohmann::json::object();
  std::vector<std::string> warnings;
  std::vector<std::string> errors;
  int exit_status = kExitOk;
  std::string format = "table";

  bool operator==(const Report&) const = default;
};

nlohmann::json report_to_json(const Report& r);
Report report_from_json(const nlohmann::json& j);
std::string emit_table(const Report& r);
std::string emit(const Report& r);

/// Arguments exclude the program name.
Report execute(const std::vector<std::string>& args);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string file_digest(const std::string& path);

}  // namespace ncjoin
