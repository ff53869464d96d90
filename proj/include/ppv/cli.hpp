#pragma once

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ppv::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Exit codes of the tool.
enum ExitCode : int {
  kPass = 0,
  kGateFailed = 1,
  kConfigError = 2,
  kNumericError = 3,
};

inline const std::vector<std::string>& scenario_kinds() {
  static const std::vector<std::string> kinds{"partitions", "verify-mecke-palm", "moments", "oracle",
                                              "levy-system", "exit-law", "martingale"};
  return kinds;
}

/// Command-line overrides applied on top of the config document.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<unsigned> workers;
  /// Moment factor document (moments --spec).
  std::optional<json> moment_spec;
};

struct RunOutcome {
  int exit_code = kPass;
  /// Full report; "run" holds wall time and worker count, everything else is
  /// a function of the config and seed only.
  json report;
  /// CSV side tables by name.
  std::map<std::string, std::string> tables;
  /// Human-readable lines for stdout.
  std::vector<std::string> summary;
};

/// Parses a JSON document from a file; throws ConfigError on I/O or syntax errors.
json load_json(const std::string& path);

/// Validates and runs one scenario. Throws ConfigError for schema violations and
/// NumericError / CapExceededError for numeric failures.
RunOutcome run_config(const json& config, const Overrides& overrides = {});

/// Report without the "run" object; equal for equal config and seed.
json reproducible_part(const json& report);

/// Writes report and side tables (tables go next to the report as <stem>.<name>.csv).
void write_outputs(const RunOutcome& outcome, const std::string& report_path);

/// Entry point of the `ppv` tool.
int main_entry(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ppv::cli
