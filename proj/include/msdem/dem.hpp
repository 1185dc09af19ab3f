#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "msdem/core.hpp"

namespace msdem {

/// Per-axis boundary handling of a DEM cell.
struct Boundary {
  bool periodic_x = true;
  bool periodic_y = true;

  static constexpr Boundary doubly_periodic() { return {true, true}; }
  static constexpr Boundary open() { return {false, false}; }
};

/// One overlapping floe pair, l < j. n_hat points from j's center toward l's.
struct ContactPair {
  std::size_t l = 0;
  std::size_t j = 0;
  double d = 0.0;
  Vec2 n_hat{1.0, 0.0};
  Vec2 t_hat{0.0, 1.0};
  double delta = 0.0; // d - (r_l + r_j), negative in contact
};

/// Contact force on floe l (the force on j is the exact negation) and the
/// torques the tangential force exerts on both floes.
struct ContactForce {
  Vec2 fn_l;
  Vec2 ft_l;
  double torque_l = 0.0;
  double torque_j = 0.0;
};

struct StepOptions {
  bool drag = true;
  /// Engulfed pairs (d <= |r_l - r_j|) throw when true; otherwise the chord
  /// is clamped to 2*min(r_l, r_j).
  bool strict_engulfment = true;
};

/// Sums gathered while evaluating one step, all at the pre-step state except
/// max_abs_omega (post-step). Sums run over floes in index order.
struct StepTotals {
  Vec2 sum_velocity;
  double sum_omega = 0.0;
  Vec2 drag_force;
  double drag_torque = 0.0;
  double max_abs_omega = 0.0;
  std::size_t contacts = 0;
};

/// An independent DEM: a fixed set of floes in a rectangular sub-domain.
class DemCell {
public:
  DemCell() = default;
  DemCell(std::vector<Floe> floes, Rect subdomain, Boundary boundary);

  std::span<const Floe> floes() const { return floes_; }
  std::span<Floe> floes() { return floes_; }
  std::size_t size() const { return floes_.size(); }
  const Rect& subdomain() const { return subdomain_; }
  const Boundary& boundary() const { return boundary_; }

  double max_radius() const;
  /// Covered area fraction pi * sum r^2 / area.
  double concentration() const;

  /// a - b under the minimum-image convention on periodic axes.
  Vec2 separation(Vec2 a, Vec2 b) const;
  /// Wraps the floe center into the sub-domain along periodic axes.
  void wrap(Floe& f) const;

  // Scratch owned by the cell so stepping does not reallocate.
  struct Scratch {
    std::vector<ContactPair> pairs;
    std::vector<ContactForce> pair_forces;
    std::vector<Vec2> force;
    std::vector<double> torque;
    std::vector<int> bucket_of;
    std::vector<int> bucket_start;
    std::vector<int> bucket_floes;
    std::vector<std::size_t> incident_start;
    std::vector<std::size_t> incident;
  };
  Scratch& scratch() const { return scratch_; }

private:
  std::vector<Floe> floes_;
  Rect subdomain_{};
  Boundary boundary_{};
  mutable Scratch scratch_;
};

/// Overlapping pairs via a uniform spatial hash (bucket edge >= 2 r_max),
/// canonical (l, j) order with l < j. Throws ConfigError when a periodic
/// extent is below 4 r_max.
std::vector<ContactPair> neighbor_pairs(const DemCell& cell);

/// Same contract as neighbor_pairs; the per-floe scan runs on OpenMP workers.
std::vector<ContactPair> neighbor_pairs_parallel(const DemCell& cell);

/// O(N^2) all-pairs scan. Reference for neighbor_pairs.
std::vector<ContactPair> neighbor_pairs_brute_force(const DemCell& cell);

/// Length of the common chord of the two discs.
double chord_length(const ContactPair& pair, double r_l, double r_j, bool strict = true);

ContactForce contact_forces(const ContactPair& pair, std::span<const Floe> floes,
                            const PhysParams& params, bool strict = true);

/// Quadratic ocean drag on the floe, evaluated at its center.
Vec2 drag_force(const Floe& floe, const OceanField& ocean, const PhysParams& params);

/// Quadratic rotational drag toward half the ocean vorticity.
double drag_torque(const Floe& floe, const OceanField& ocean, const PhysParams& params);

/// One forward-Euler step with forces from the pre-step state. Serial.
/// Throws DivergenceError naming the first non-finite floe.
StepTotals step_dem(DemCell& cell, const OceanField& ocean, const PhysParams& params, double dt,
                    const StepOptions& opts = {});

/// OpenMP version of step_dem for large cells; bit-identical results.
StepTotals step_dem_parallel(DemCell& cell, const OceanField& ocean, const PhysParams& params,
                             double dt, const StepOptions& opts = {});

/// CSV with header id,r,x,y,theta,vx,vy,omega.
void write_floes_csv(std::ostream& os, std::span<const Floe> floes);

} // namespace msdem
