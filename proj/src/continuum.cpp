#include "msdem/continuum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace msdem {

ContinuumState::ContinuumState(const CoarseGrid& g) : grid(g) {
  const auto n = static_cast<std::size_t>(g.size());
  for (auto* f : {&conc, &px, &py, &pw, &vbar_x, &vbar_y, &src_x, &src_y, &src_w}) f->assign(n, 0.0);
}

double ContinuumState::max_speed() const {
  double v = 0.0;
  for (std::size_t k = 0; k < vbar_x.size(); ++k) v = std::max(v, std::hypot(vbar_x[k], vbar_y[k]));
  return v;
}

double ContinuumState::total_mass() const {
  double s = 0.0;
  for (double c : conc) s += c;
  return s * grid.cell_area();
}

Vec2 ContinuumState::total_momentum() const {
  Vec2 s;
  for (std::size_t k = 0; k < px.size(); ++k) s = s + Vec2{px[k], py[k]};
  return s * grid.cell_area();
}

double cfl_bound(const CoarseGrid& grid, double vmax) {
  constexpr double kCourantMax = 1.0;
  if (vmax == 0.0) return std::numeric_limits<double>::infinity();
  return kCourantMax * grid.dX() / std::abs(vmax);
}

namespace {

void check_cfl(const ContinuumState& s, double tau) {
  if (!(tau > 0.0)) throw ConfigError("continuum substep must be positive");
  const double bound = cfl_bound(s.grid, s.max_speed());
  if (tau > bound)
    throw StabilityError(fmt::format("substep {} exceeds the CFL bound {} (max |vbar| = {})", tau,
                                     bound, s.max_speed()));
}

struct Fields {
  const std::vector<double>* q;
  std::vector<double>* out;
  const std::vector<double>* src; // nullptr: no source
};

std::array<Fields, 4> fields_of(const ContinuumState& in, ContinuumState& out) {
  return {{{&in.conc, &out.conc, nullptr},
           {&in.px, &out.px, &in.src_x},
           {&in.py, &out.py, &in.src_y},
           {&in.pw, &out.pw, &in.src_w}}};
}

// The single update expression shared by both paths, so the reference and
// the parallel kernel round identically.
inline double lf_update(double qE, double qW, double qN, double qS, double vE, double vW,
                        double vN, double vS, double cx, double cy, double tau, double src) {
  return 0.25 * (qE + qW + qN + qS) - cx * (vE * qE - vW * qW) - cy * (vN * qN - vS * qS) +
         tau * src;
}

// Row kernel on the unpadded arrays: neighbors via index wrap, zero ghosts
// on x-walls.
void lf_row(const ContinuumState& in, ContinuumState& out, int j, double tau, ContinuumBc bc) {
  const CoarseGrid& g = in.grid;
  const int nx = g.nx();
  const int ny = g.ny();
  const double cx = tau / (2.0 * g.hx());
  const double cy = tau / (2.0 * g.hy());
  const int jn = (j + 1) % ny;
  const int js = (j - 1 + ny) % ny;
  const bool wall = bc == ContinuumBc::WallX;
  for (int i = 0; i < nx; ++i) {
    const bool east_ghost = wall && i == nx - 1;
    const bool west_ghost = wall && i == 0;
    const int ie = (i + 1) % nx;
    const int iw = (i - 1 + nx) % nx;
    const int k = j * nx + i;
    const int kE = j * nx + ie, kW = j * nx + iw, kN = jn * nx + i, kS = js * nx + i;
    for (const auto& f : fields_of(in, out)) {
      const auto& q = *f.q;
      const double qE = east_ghost ? 0.0 : q[kE];
      const double qW = west_ghost ? 0.0 : q[kW];
      const double vE = east_ghost ? 0.0 : in.vbar_x[kE];
      const double vW = west_ghost ? 0.0 : in.vbar_x[kW];
      (*f.out)[k] = lf_update(qE, qW, q[kN], q[kS], vE, vW, in.vbar_y[kN], in.vbar_y[kS], cx, cy,
                              tau, f.src ? (*f.src)[k] : 0.0);
    }
  }
}

void finalize(ContinuumState& out, const LfOptions& opts) {
  std::size_t clamped = 0;
  const auto n = out.conc.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (!std::isfinite(out.conc[k]) || !std::isfinite(out.px[k]) || !std::isfinite(out.py[k]) ||
        !std::isfinite(out.pw[k]))
      throw DivergenceError(fmt::format("continuum state became non-finite in cell {}", k), k);
    if (out.conc[k] > opts.conc_max) {
      out.conc[k] = opts.conc_max;
      ++clamped;
    } else if (out.conc[k] < 0.0) {
      out.conc[k] = 0.0;
      ++clamped;
    }
  }
  if (clamped > 0)
    spdlog::warn("concentration clamped to [0, {}] in {} cell(s)", opts.conc_max, clamped);
}

} // namespace

ContinuumState lf_substep(const ContinuumState& state, double tau, const LfOptions& opts) {
  check_cfl(state, tau);
  ContinuumState out = state;
  const int ny = state.grid.ny();
#pragma omp parallel for schedule(static)
  for (int j = 0; j < ny; ++j) lf_row(state, out, j, tau, opts.bc);
  finalize(out, opts);
  return out;
}

ContinuumState lf_substep_reference(const ContinuumState& state, double tau,
                                    const LfOptions& opts) {
  check_cfl(state, tau);
  const CoarseGrid& g = state.grid;
  const int nx = g.nx();
  const int ny = g.ny();
  const int px_ = nx + 2; // padded row length
  const double cx = tau / (2.0 * g.hx());
  const double cy = tau / (2.0 * g.hy());

  // Copy into a ghost-padded array, filling the halo from the boundary rule.
  auto pad = [&](const std::vector<double>& q) {
    std::vector<double> p(static_cast<std::size_t>(px_ * (ny + 2)), 0.0);
    auto at = [&](int i, int j) -> double& { return p[static_cast<std::size_t>((j + 1) * px_ + (i + 1))]; };
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) at(i, j) = q[static_cast<std::size_t>(j * nx + i)];
    for (int j = 0; j < ny; ++j) {
      at(-1, j) = opts.bc == ContinuumBc::WallX ? 0.0 : at(nx - 1, j);
      at(nx, j) = opts.bc == ContinuumBc::WallX ? 0.0 : at(0, j);
    }
    for (int i = -1; i <= nx; ++i) {
      at(i, -1) = at(i, ny - 1);
      at(i, ny) = at(i, 0);
    }
    return p;
  };
  const auto vx = pad(state.vbar_x);
  const auto vy = pad(state.vbar_y);

  ContinuumState out = state;
  for (const auto& f : fields_of(state, out)) {
    const auto q = pad(*f.q);
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const auto c = static_cast<std::size_t>((j + 1) * px_ + (i + 1));
        const std::size_t e = c + 1, w = c - 1, nn = c + static_cast<std::size_t>(px_),
                          s = c - static_cast<std::size_t>(px_);
        const auto k = static_cast<std::size_t>(j * nx + i);
        (*f.out)[k] = lf_update(q[e], q[w], q[nn], q[s], vx[e], vx[w], vy[nn], vy[s], cx, cy, tau,
                                f.src ? (*f.src)[k] : 0.0);
      }
    }
  }
  finalize(out, opts);
  return out;
}

ContinuumState solve_coarse_step(const ContinuumState& state, double dT, int N1,
                                 const LfOptions& opts) {
  if (N1 < 1) throw ConfigError(fmt::format("N1 must be >= 1, got {}", N1));
  const double tau = dT / N1;
  ContinuumState s = lf_substep(state, tau, opts);
  for (int k = 1; k < N1; ++k) s = lf_substep(s, tau, opts);
  return s;
}

} // namespace msdem
