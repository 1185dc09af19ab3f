#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "msdem/harness.hpp"

namespace msdem::cli {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3 };

/// Flat run configuration. JSON keys match the field names.
struct RunConfig {
  std::string scenario;  // required
  double scale = 0.5;
  std::string model = "msdem";  // msdem | dem
  int nx = 48, ny = 24;
  double dt = 1e-4;
  double dT = 0.01;
  int n_t = 10;
  int N1 = 1;
  double T = 0.2;
  std::vector<double> times;  // snapshot times; empty means {T}
  PhysParams params;
  bool strict_engulfment = true;
  double conc_max = 0.91;
  double r_min = 1e-6;
  std::string out = "out";
  bool dump_fields = false;
  bool dump_floes = false;
  int workers = 0;  // 0: MSDEM_WORKERS or the OpenMP default
  unsigned seed = 0;  // reserved
  // convergence only
  std::vector<std::pair<int, int>> grids;
  std::string truth_model = "dem";  // dem | msdem
  std::string cache_dir = ".msdem-cache";

  /// Throws ConfigError on any inconsistency.
  void validate() const;
  std::vector<double> snapshot_times() const;
  StudySettings settings() const;
};

/// "48x24" -> (48, 24). Throws ConfigError.
std::pair<int, int> parse_grid(const std::string& s);

/// Overwrites fields present in `j`; unknown keys are an error.
void apply_json(RunConfig& cfg, const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);

/// Stable FNV-1a hash of the fields that determine the truth trajectory.
std::string truth_key(const RunConfig& cfg, double T_max, const std::vector<double>& times);

/// Truth snapshots from the cache, computing and storing them on a miss.
FullDemResult cached_truth(const RunConfig& cfg, const ScenarioSpec& spec, double T_max,
                           const std::vector<double>& times, bool& hit);

int cmd_run(const RunConfig& cfg);
int cmd_convergence(const RunConfig& cfg);
int cmd_validate(const RunConfig& cfg);
int cmd_dump_scenario(const RunConfig& cfg);

/// Full entry point: parses argv, dispatches, maps errors to exit codes.
int main(int argc, char** argv);

} // namespace msdem::cli
