#pragma once

#include <vector>

#include "msdem/core.hpp"

namespace msdem {

/// Ghost-cell treatment of the coarse solver.
enum class ContinuumBc {
  Periodic, ///< periodic in both axes
  WallX,    ///< periodic in y; zero-Dirichlet ghost cells on both x-boundaries
};

/// Cell-averaged moment fields on a coarse grid, row-major (see CoarseGrid::flat).
///
/// Conserved fields are per unit area: `conc` is the covered area fraction,
/// `px`/`py` the momentum density sum(m v)/A, `pw` the angular-momentum
/// density sum(I omega)/A. The remaining fields are coefficients frozen over
/// a coarse step: `vbar_*` the DEM-averaged velocity and `src_*` the
/// area-normalized drag sources.
struct ContinuumState {
  CoarseGrid grid;
  std::vector<double> conc, px, py, pw;
  std::vector<double> vbar_x, vbar_y;
  std::vector<double> src_x, src_y, src_w;

  ContinuumState() = default;
  explicit ContinuumState(const CoarseGrid& g);

  /// Largest |vbar| over all cells.
  double max_speed() const;
  double total_mass() const;     // sum conc * cell area
  Vec2 total_momentum() const;   // sum (px, py) * cell area
};

struct LfOptions {
  ContinuumBc bc = ContinuumBc::Periodic;
  /// Upper clamp on concentration; values above it are clamped with a warning.
  double conc_max = 0.91;
};

/// Largest stable coarse step C_max * dX / vmax with C_max = 1 and dX the
/// cell diagonal. Returns +infinity for vmax == 0.
double cfl_bound(const CoarseGrid& grid, double vmax);

/// One Lax-Friedrichs substep of length tau for conc, px, py, pw with frozen
/// vbar and sources. Rows run on OpenMP workers; the result does not depend
/// on the worker count. Throws StabilityError if tau exceeds the CFL bound
/// and DivergenceError (cell index) on non-finite output.
ContinuumState lf_substep(const ContinuumState& state, double tau, const LfOptions& opts = {});

/// Plain serial loop over the same stencil. Reference for lf_substep.
ContinuumState lf_substep_reference(const ContinuumState& state, double tau,
                                    const LfOptions& opts = {});

/// N1 substeps of dT / N1 with coefficients held fixed.
ContinuumState solve_coarse_step(const ContinuumState& state, double dT, int N1,
                                 const LfOptions& opts = {});

} // namespace msdem
