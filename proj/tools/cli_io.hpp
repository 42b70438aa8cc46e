#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace debias_cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitCompute = 1,
  kExitUsage = 2,
  kExitMissingFile = 3,
  kExitMalformed = 4,
  kExitIo = 5,
};

//! Carries the process exit code. Code 0 with a message is a help request.
class CliError : public std::runtime_error {
 public:
  CliError(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  int code() const noexcept { return code_; }

 private:
  int code_;
};

struct RunConfig {
  std::string command;
  std::string input;
  std::string output;  // empty: stdout
  std::string format = "json";
  double alpha = 0.05;
  double tau = 1.0;
  std::size_t boot = 500;
  std::size_t grid = 0;      // 0: 512 in 1-d, 128 per axis in 2-d
  std::string bandwidth;     // empty: rot for densities, cv for regressions
  std::uint64_t seed = 42;
  unsigned threads = 0;      // 0: available parallelism
  std::string band_kind = "fixed";
  std::optional<double> level;
  std::optional<double> r0;
  std::string kernel = "gaussian";
  std::string estimator = "debiased";
  int cv_folds = 5;
  int cv_repeats = 10;
  // simulate-coverage
  std::string scenario;
  std::size_t n = 0;         // 0: scenario default
  std::size_t trials = 200;
  std::vector<double> nominal{0.95};
  std::string bandwidth_rule;  // empty: rot for densities, cv for regressions
  double fixed_h = 0.0;
};

//! Validated configuration; throws CliError(kExitUsage) naming the flag.
RunConfig parse_args(int argc, const char* const* argv);

//! "a:b:step" (inclusive arithmetic sequence) or a comma-separated list.
std::vector<double> parse_levels(const std::string& spec);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;  // by header position
  std::size_t rows = 0;
};

//! Header row required; every data field must parse as a finite number.
//! Missing file: kExitMissingFile. Bad rows: kExitMalformed listing up to
//! ten offending line numbers.
CsvTable read_csv(const std::string& path, const std::vector<std::string>& required);

//! Executes the command and returns the result document.
nlohmann::json run(const RunConfig& cfg);

//! Canonical text: sorted keys, two-space indent, trailing newline.
std::string serialize(const nlohmann::json& doc);

//! Writes the JSON (stdout when the path is empty) and, for --format csv,
//! a flat table next to it. I/O failure: kExitIo.
void write_result(const nlohmann::json& doc, const RunConfig& cfg);

//! Full CLI: parse, run, write. Returns the process exit code.
int main_entry(int argc, const char* const* argv);

}  // namespace debias_cli
