#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "msdem/continuum.hpp"
#include "msdem/coupling.hpp"
#include "msdem/core.hpp"
#include "msdem/dem.hpp"

namespace msdem {

enum class ScenarioId { S41, S42, S43, S44 };

/// Parses "s41".."s44". Throws ConfigError otherwise.
ScenarioId parse_scenario(std::string_view s);
std::string to_string(ScenarioId id);

struct ScenarioSpec {
  ScenarioId id = ScenarioId::S41;
  double scale = 1.0;
  Rect domain{0.0, 4.0, 0.0, 2.0};
  int nx_f = 480;  // floe lattice
  int ny_f = 240;
  double r_c = 1.0 / 240.0;
  OceanField ocean;
  Boundary boundary;        // for the global DEM
  bool right_wall = false;  // velocity clamp at x = x1
  ContinuumBc continuum_bc = ContinuumBc::Periodic;

  /// r_c (0.2 + 0.8 sin(pi x / 4)).
  double radius_at(double x) const;
};

/// Scenario with the floe lattice shrunk by `scale` (1 gives 480 x 240).
/// Throws ConfigError for an unknown id or a scale that does not give a
/// whole lattice.
ScenarioSpec make_scenario(ScenarioId id, double scale = 1.0);

/// One floe per lattice site, centered, moving with the ocean at its center.
std::vector<Floe> initial_floes(const ScenarioSpec& spec);

/// Wall clamp: floes touching x1 lose any positive vx and are pushed inside.
void apply_right_wall(std::span<Floe> floes, double x1);

struct FullDemSnapshot {
  double time = 0.0;
  std::vector<Floe> floes;
};

struct FullDemOptions {
  PhysParams params;
  double dt = 1e-4;
  StepOptions step;
  std::vector<double> snapshot_times;  // multiples of dt
  bool parallel = true;
  /// Called with the state after every step (and once for step 0).
  std::function<void(long long step, double time, std::span<const Floe> floes)> observer;
};

struct FullDemResult {
  std::vector<FullDemSnapshot> snapshots;
  double max_abs_omega = 0.0;  // over all floes and steps
  double wall_seconds = 0.0;
};

/// Integrates the whole domain as one DEM to time T. This is the truth model.
/// With a right wall, engulfment is always handled permissively.
FullDemResult run_full_dem(const ScenarioSpec& spec, double T, const FullDemOptions& opts);

/// Center rule: each floe's full area goes to the cell holding its center.
CellField concentration_field(std::span<const Floe> floes, const CoarseGrid& grid);

/// Mean vx of the floes centered in each cell, 0 for an empty cell.
CellField mean_velocity_field(std::span<const Floe> floes, const CoarseGrid& grid);

/// sqrt(sum (a - b)^2 hx hy). Throws ConfigError on a grid mismatch.
double l2_error(const CellField& a, const CellField& b);

/// Least-squares slope of log(error) against log(dX). Throws ConfigError
/// for fewer than two points or a non-positive value.
double convergence_rate(const std::vector<std::pair<double, double>>& dx_error);

/// Settings shared by every grid of a convergence study.
struct StudySettings {
  PhysParams params;
  double dt = 1e-4;
  double dT = 0.01;
  int n_t = 10;
  int N1 = 1;
  StepOptions step;
  double conc_max = 0.91;
  double r_min = 1e-6;
};

/// Throws ConfigError unless every coarse cell holds a whole block of the
/// initial floe lattice.
void check_grid_fits(const ScenarioSpec& spec, int nx, int ny);

/// msDEM configuration for a scenario on an nx x ny grid, run to T.
MsdemConfig make_msdem_config(const ScenarioSpec& spec, int nx, int ny, double T,
                              const StudySettings& settings, std::vector<double> snapshot_times);

struct StudyRow {
  double T = 0.0;
  int nx = 0, ny = 0;
  double dX = 0.0;
  double l2_error = 0.0;
};

struct StudyResult {
  std::vector<StudyRow> rows;                      // grid-major, then time
  std::vector<std::pair<double, double>> slopes;   // (T, slope) for each time that could be fitted
  std::vector<MsdemResult> runs;                   // one per grid
};

/// Concentration errors of msDEM against truth snapshots for every grid and
/// time, plus fitted slopes. Times whose errors cannot be fitted (zero
/// error) get no slope and a logged warning.
StudyResult convergence_study(const ScenarioSpec& spec, const std::vector<std::pair<int, int>>& grids,
                              const std::vector<double>& times, const StudySettings& settings,
                              const FullDemResult& truth);

} // namespace msdem
