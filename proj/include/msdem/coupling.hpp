#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "msdem/continuum.hpp"
#include "msdem/core.hpp"
#include "msdem/dem.hpp"

namespace msdem {

/// Time-stepping constants tying the fine and coarse models together.
struct CouplingSchedule {
  double dt = 1e-4;  // fine step
  double dT = 0.01;  // coarse step
  int N0 = 100;      // fine steps per coarse step
  int n_t = 10;      // fine steps between gradual updates
  int N1 = 1;        // continuum substeps per coarse step
  long long Nt = 0;  // total fine steps

  /// Builds and validates a schedule running to final time T.
  static CouplingSchedule make(double dt, double dT, int n_t, int N1, double T);

  /// Gradual updates per coarse window, N0 / n_t.
  int updates_per_window() const { return N0 / n_t; }
  int coarse_steps() const { return static_cast<int>(Nt / N0); }
  void validate() const;
};

/// Window-averaged statistics of one local DEM.
struct CellStats {
  Vec2 mean_v;               // over all (floe, fine step) samples
  double mean_w = 0.0;
  double conc = 0.0;         // at window end
  Vec2 drag_src;             // window mean of total drag force / cell area
  double drag_src_w = 0.0;   // window mean of total drag torque / cell area
  Vec2 momentum_density;     // sum(m v) / area at window end
  double ang_momentum_density = 0.0; // sum(I omega) / area at window end
  std::size_t samples = 0;   // floes x fine steps
};

/// Running sums over the fine steps of one window.
class StatsAccumulator {
public:
  void add(const StepTotals& t);
  void reset() { *this = {}; }
  int steps() const { return steps_; }
  /// Statistics for the window just completed. Throws ConfigError for an
  /// empty cell or an empty window.
  CellStats finish(const DemCell& cell, const PhysParams& params) const;

private:
  Vec2 sum_v_;
  double sum_w_ = 0.0;
  Vec2 sum_drag_;
  double sum_drag_w_ = 0.0;
  int steps_ = 0;
};

/// Statistics of `cell` over a window given its per-step totals.
CellStats accumulate_stats(const DemCell& cell, std::span<const StepTotals> window,
                           const PhysParams& params);

/// Continuum targets for one cell, as area densities.
struct CellTargets {
  double conc = 0.0;
  Vec2 momentum_density;
  double ang_momentum_density = 0.0;
};

/// Mean floe radius that makes the cell's concentration equal conc_target
/// when all radii are scaled by a common factor. Throws DegenerateCellError
/// if the current concentration is zero.
double target_mean_radius(double conc_target, const DemCell& cell);

/// Everything the gradual updates of one window need, taken from the
/// window-start snapshot.
struct WindowPlan {
  std::vector<double> r0;  // snapshot radii
  double sum_r0 = 0.0;
  double mean_r0 = 0.0;
  double mean_r_target = 0.0;
  Vec2 dv;                 // full-window velocity increment, same for every floe
  double dw = 0.0;         // full-window spin increment, same for every floe
  int updates = 1;         // N0 / n_t
  double r_min = 1e-6;
};

/// Plans the window. Velocity and spin increments are sized against the
/// masses and inertias the floes will have after the final radius update,
/// so the frozen cell lands on all three targets at once.
WindowPlan plan_window(const DemCell& cell, const CellTargets& targets, const PhysParams& params,
                       int updates, double r_min = 1e-6);

/// Substep j (1..updates): r_l = r0_l + n (rbar - rbar0) r0_l / sum(r0) * j / updates.
/// Radii that would be <= 0 are clamped to r_min with a warning.
void gradual_update_radii(DemCell& cell, const WindowPlan& plan, int j);

/// Adds this substep's share of the planned velocity increment to every floe.
void gradual_update_momentum(DemCell& cell, const WindowPlan& plan, int j);

/// Adds this substep's share of the planned spin increment to every floe.
void gradual_update_angular(DemCell& cell, const WindowPlan& plan, int j);

/// Radii, then momentum, then angular momentum.
void apply_gradual_update(DemCell& cell, const WindowPlan& plan, int j);

struct MsdemConfig {
  CoarseGrid grid;
  PhysParams params;
  CouplingSchedule schedule;
  StepOptions step;
  LfOptions lf;
  /// Clamp the DEM-averaged velocity of the rightmost column to zero.
  bool wall_column = false;
  double r_min = 1e-6;
  /// Times at which to record snapshots; must be multiples of dT.
  std::vector<double> snapshot_times;
};

struct MsdemSnapshot {
  double time = 0.0;
  CellField conc;      // pi sum r^2 / cell area of each local DEM
  CellField mean_vx;   // floe-averaged vx of each local DEM
};

struct CoarseDiagnostics {
  int step = 0;
  double time = 0.0;
  double total_mass = 0.0;      // continuum
  Vec2 total_momentum;          // continuum
  double max_abs_omega = 0.0;   // over all floes and fine steps so far
  std::size_t contacts = 0;     // contact pairs summed over the last window's fine steps
};

struct MsdemResult {
  std::vector<MsdemSnapshot> snapshots;
  std::vector<CoarseDiagnostics> diagnostics;
  double max_abs_omega = 0.0;
  double wall_seconds = 0.0;
};

/// Called at every coarse-step boundary (step 0 is the initial state, the
/// continuum pointer is null until it has been initialized).
using MsdemObserver =
    std::function<void(int step, double time, std::span<const DemCell> cells,
                       const ContinuumState* continuum)>;

/// Partitions floes into one doubly-periodic DEM per coarse cell. Throws
/// ConfigError if a cell receives no floes.
std::vector<DemCell> build_cells(std::span<const Floe> floes, const CoarseGrid& grid);

/// Per-cell summary of one window.
struct WindowSummary {
  double max_abs_omega = 0.0;
  std::size_t contacts = 0;
};

/// Steps every cell through one coarse window: N0 fine steps, with gradual
/// update j applied after fine step j*n_t when plans are given. Cells run
/// independently on OpenMP workers. A failing cell aborts the window with
/// the coarse step and cell index attached (lowest failing cell wins).
std::vector<WindowSummary> run_window(std::vector<DemCell>& cells,
                                      std::vector<StatsAccumulator>& acc,
                                      const std::vector<WindowPlan>* plans,
                                      const OceanField& ocean, const MsdemConfig& cfg,
                                      int coarse_step);

/// Serial reference for run_window.
std::vector<WindowSummary> run_window_serial(std::vector<DemCell>& cells,
                                             std::vector<StatsAccumulator>& acc,
                                             const std::vector<WindowPlan>* plans,
                                             const OceanField& ocean, const MsdemConfig& cfg,
                                             int coarse_step);

/// The coupled particle-continuum run.
MsdemResult run_msdem(std::span<const Floe> floes, const OceanField& ocean, const MsdemConfig& cfg,
                      const MsdemObserver& observer = {});

} // namespace msdem
