#include "msdem/dem.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace msdem {

DemCell::DemCell(std::vector<Floe> floes, Rect subdomain, Boundary boundary)
    : floes_(std::move(floes)), subdomain_(subdomain), boundary_(boundary) {
  if (!(subdomain.width() > 0.0) || !(subdomain.height() > 0.0))
    throw ConfigError("DEM sub-domain must have positive extent");
  for (std::size_t k = 0; k < floes_.size(); ++k) {
    if (!(floes_[k].r > 0.0))
      throw ConfigError(fmt::format("floe {} has non-positive radius {}", k, floes_[k].r));
    wrap(floes_[k]);
  }
}

double DemCell::max_radius() const {
  double r = 0.0;
  for (const auto& f : floes_) r = std::max(r, f.r);
  return r;
}

double DemCell::concentration() const {
  double a = 0.0;
  for (const auto& f : floes_) a += f.r * f.r;
  return std::numbers::pi * a / subdomain_.area();
}

Vec2 DemCell::separation(Vec2 a, Vec2 b) const {
  double dx = a.x - b.x;
  double dy = a.y - b.y;
  if (boundary_.periodic_x) {
    const double L = subdomain_.width();
    dx -= L * std::nearbyint(dx / L);
  }
  if (boundary_.periodic_y) {
    const double L = subdomain_.height();
    dy -= L * std::nearbyint(dy / L);
  }
  return {dx, dy};
}

void DemCell::wrap(Floe& f) const {
  if (boundary_.periodic_x) f.x = wrap_periodic(f.x, subdomain_.x0, subdomain_.x1);
  if (boundary_.periodic_y) f.y = wrap_periodic(f.y, subdomain_.y0, subdomain_.y1);
}

// ---------------------------------------------------------------------------
// Neighbor search

namespace {

// Pair record for (l, j) if the discs overlap. Shared by the hash and the
// brute-force scan so both apply the identical predicate.
bool contact_if_overlap(const DemCell& cell, std::size_t l, std::size_t j, ContactPair& out) {
  const auto floes = cell.floes();
  const Floe& a = floes[l];
  const Floe& b = floes[j];
  const Vec2 s = cell.separation(a.pos(), b.pos());
  const double d = s.norm();
  const double delta = d - (a.r + b.r);
  if (!(delta < 0.0)) return false;
  out.l = l;
  out.j = j;
  out.d = d;
  out.delta = delta;
  out.n_hat = d > 0.0 ? s * (1.0 / d) : Vec2{1.0, 0.0};
  out.t_hat = perp(out.n_hat);
  return true;
}

void check_min_image(const DemCell& cell, double r_max) {
  const auto& bc = cell.boundary();
  const auto& sd = cell.subdomain();
  if ((bc.periodic_x && sd.width() < 4.0 * r_max) || (bc.periodic_y && sd.height() < 4.0 * r_max))
    throw ConfigError(fmt::format(
        "periodic sub-domain {}x{} is smaller than 4*r_max = {}; minimum image is ambiguous",
        sd.width(), sd.height(), 4.0 * r_max));
}

struct BucketGrid {
  int nbx = 1, nby = 1;
  double bw = 1.0, bh = 1.0;
};

BucketGrid make_buckets(const DemCell& cell, double r_max) {
  const auto& sd = cell.subdomain();
  BucketGrid g;
  const double edge = 2.0 * r_max;
  constexpr int kMaxPerAxis = 1 << 12;
  g.nbx = std::clamp(static_cast<int>(std::floor(sd.width() / edge)), 1, kMaxPerAxis);
  g.nby = std::clamp(static_cast<int>(std::floor(sd.height() / edge)), 1, kMaxPerAxis);
  g.bw = sd.width() / g.nbx;
  g.bh = sd.height() / g.nby;
  return g;
}

// Counting sort of floes into buckets; fills scratch.bucket_{of,start,floes}.
void fill_buckets(const DemCell& cell, const BucketGrid& g) {
  auto& s = cell.scratch();
  const auto floes = cell.floes();
  const auto& sd = cell.subdomain();
  const std::size_t n = floes.size();
  const int nb = g.nbx * g.nby;
  s.bucket_of.resize(n);
  s.bucket_start.assign(static_cast<std::size_t>(nb) + 1, 0);
  s.bucket_floes.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int bx = std::clamp(static_cast<int>(std::floor((floes[k].x - sd.x0) / g.bw)), 0, g.nbx - 1);
    const int by = std::clamp(static_cast<int>(std::floor((floes[k].y - sd.y0) / g.bh)), 0, g.nby - 1);
    s.bucket_of[k] = by * g.nbx + bx;
    ++s.bucket_start[s.bucket_of[k] + 1];
  }
  for (int b = 0; b < nb; ++b) s.bucket_start[b + 1] += s.bucket_start[b];
  std::vector<int> fill(s.bucket_start.begin(), s.bucket_start.end() - 1);
  for (std::size_t k = 0; k < n; ++k) s.bucket_floes[fill[s.bucket_of[k]]++] = static_cast<int>(k);
}

// Unique buckets in the 3x3 stencil around bucket b.
int stencil(const DemCell& cell, const BucketGrid& g, int b, int (&out)[9]) {
  const auto& bc = cell.boundary();
  const int bx = b % g.nbx;
  const int by = b / g.nbx;
  int count = 0;
  for (int oy = -1; oy <= 1; ++oy) {
    int y = by + oy;
    if (y < 0 || y >= g.nby) {
      if (!bc.periodic_y) continue;
      y = (y + g.nby) % g.nby;
    }
    for (int ox = -1; ox <= 1; ++ox) {
      int x = bx + ox;
      if (x < 0 || x >= g.nbx) {
        if (!bc.periodic_x) continue;
        x = (x + g.nbx) % g.nbx;
      }
      const int nb = y * g.nbx + x;
      if (std::find(out, out + count, nb) == out + count) out[count++] = nb;
    }
  }
  return count;
}

// Pairs (l, j > l) for one floe, sorted by j, appended to out.
void scan_floe(const DemCell& cell, const BucketGrid& g, std::size_t l,
               std::vector<ContactPair>& out) {
  const auto& s = cell.scratch();
  int nbrs[9];
  const int count = stencil(cell, g, s.bucket_of[l], nbrs);
  const std::size_t first = out.size();
  ContactPair p;
  for (int k = 0; k < count; ++k) {
    for (int q = s.bucket_start[nbrs[k]]; q < s.bucket_start[nbrs[k] + 1]; ++q) {
      const auto j = static_cast<std::size_t>(s.bucket_floes[q]);
      if (j <= l) continue;
      if (contact_if_overlap(cell, l, j, p)) out.push_back(p);
    }
  }
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
            [](const ContactPair& a, const ContactPair& b) { return a.j < b.j; });
}

} // namespace

std::vector<ContactPair> neighbor_pairs(const DemCell& cell) {
  std::vector<ContactPair> out;
  const double r_max = cell.max_radius();
  check_min_image(cell, r_max);
  if (cell.size() < 2) return out;
  const BucketGrid g = make_buckets(cell, r_max);
  fill_buckets(cell, g);
  for (std::size_t l = 0; l < cell.size(); ++l) scan_floe(cell, g, l, out);
  return out;
}

std::vector<ContactPair> neighbor_pairs_parallel(const DemCell& cell) {
  std::vector<ContactPair> out;
  const double r_max = cell.max_radius();
  check_min_image(cell, r_max);
  if (cell.size() < 2) return out;
  const BucketGrid g = make_buckets(cell, r_max);
  fill_buckets(cell, g);

  const auto n = static_cast<long long>(cell.size());
  std::vector<std::vector<ContactPair>> chunks;
#pragma omp parallel
  {
#pragma omp single
    chunks.resize(static_cast<std::size_t>(omp_get_num_threads()));
    auto& mine = chunks[static_cast<std::size_t>(omp_get_thread_num())];
    // Static contiguous chunks in thread order keep the concatenation canonical.
#pragma omp for schedule(static)
    for (long long l = 0; l < n; ++l) scan_floe(cell, g, static_cast<std::size_t>(l), mine);
  }
  std::size_t total = 0;
  for (const auto& c : chunks) total += c.size();
  out.reserve(total);
  for (const auto& c : chunks) out.insert(out.end(), c.begin(), c.end());
  return out;
}

std::vector<ContactPair> neighbor_pairs_brute_force(const DemCell& cell) {
  std::vector<ContactPair> out;
  ContactPair p;
  for (std::size_t l = 0; l < cell.size(); ++l)
    for (std::size_t j = l + 1; j < cell.size(); ++j)
      if (contact_if_overlap(cell, l, j, p)) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------
// Forces

double chord_length(const ContactPair& pair, double r_l, double r_j, bool strict) {
  const double d = pair.d;
  if (d <= std::abs(r_l - r_j)) {
    if (strict)
      throw DegenerateContactError(fmt::format(
          "floes {} and {} are engulfed (d = {}, radii {} and {})", pair.l, pair.j, d, r_l, r_j));
    return 2.0 * std::min(r_l, r_j);
  }
  if (d >= r_l + r_j) return 0.0;
  const double a = (d * d + r_l * r_l - r_j * r_j) / (2.0 * d);
  return 2.0 * std::sqrt(std::max(0.0, r_l * r_l - a * a));
}

ContactForce contact_forces(const ContactPair& pair, std::span<const Floe> floes,
                            const PhysParams& params, bool strict) {
  const Floe& fl = floes[pair.l];
  const Floe& fj = floes[pair.j];
  const double c = chord_length(pair, fl.r, fj.r, strict);
  const Vec2 n = pair.n_hat;
  const Vec2 t = pair.t_hat;

  ContactForce out;
  const double fn = c * params.E * std::abs(pair.delta);
  out.fn_l = n * fn;

  // Lever arms to the midpoint of the overlap segment on the center line:
  // r^l = -arm_l * n, r^j = +arm_j * n, arm_l + arm_j = d.
  const double arm_l = 0.5 * (pair.d + fl.r - fj.r);
  const double arm_j = 0.5 * (pair.d - fl.r + fj.r);
  // (omega z x r) . t reduces to +-arm * omega for arms along n.
  const double v_t = dot(fj.vel() - fl.vel(), t) + arm_j * fj.omega + arm_l * fl.omega;

  double ft = c * params.G * v_t;
  const double cap = params.mu * fn;
  if (std::abs(ft) > cap) ft = std::copysign(cap, ft);
  out.ft_l = t * ft;

  out.torque_l = cross(n * (-arm_l), out.ft_l);
  out.torque_j = cross(n * arm_j, -out.ft_l);
  return out;
}

Vec2 drag_force(const Floe& floe, const OceanField& ocean, const PhysParams& params) {
  const double alpha = params.d_o * params.rho_o * std::numbers::pi * floe.r * floe.r;
  const Vec2 rel = ocean.at(floe.pos()) - floe.vel();
  return rel * (alpha * rel.norm());
}

double drag_torque(const Floe& floe, const OceanField& ocean, const PhysParams& params) {
  const double r2 = floe.r * floe.r;
  const double beta = params.d_o * params.rho_o * std::numbers::pi * r2 * r2;
  const double rel = 0.5 * ocean.curl_at(floe.pos()) - floe.omega;
  return beta * rel * std::abs(rel);
}

// ---------------------------------------------------------------------------
// Time stepping

namespace {

// Builds the floe -> incident pair lists in canonical pair order.
void build_incidence(const DemCell& cell, const std::vector<ContactPair>& pairs) {
  auto& s = cell.scratch();
  const std::size_t n = cell.size();
  s.incident_start.assign(n + 1, 0);
  for (const auto& p : pairs) {
    ++s.incident_start[p.l + 1];
    ++s.incident_start[p.j + 1];
  }
  for (std::size_t k = 0; k < n; ++k) s.incident_start[k + 1] += s.incident_start[k];
  s.incident.resize(2 * pairs.size());
  std::vector<std::size_t> fill(s.incident_start.begin(), s.incident_start.end() - 1);
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    s.incident[fill[pairs[q].l]++] = q;
    s.incident[fill[pairs[q].j]++] = q;
  }
}

// Force/torque on floe k: drag first, then incident contacts in pair order.
// The serial path adds contributions in exactly the same order.
inline void sum_incident(const DemCell& cell, const std::vector<ContactPair>& pairs, std::size_t k) {
  auto& s = cell.scratch();
  Vec2 f = s.force[k];
  double tq = s.torque[k];
  for (std::size_t q = s.incident_start[k]; q < s.incident_start[k + 1]; ++q) {
    const auto pi = s.incident[q];
    const ContactForce& cf = s.pair_forces[pi];
    if (pairs[pi].l == k) {
      f = f + cf.fn_l;
      f = f + cf.ft_l;
      tq += cf.torque_l;
    } else {
      f = f - cf.fn_l;
      f = f - cf.ft_l;
      tq += cf.torque_j;
    }
  }
  s.force[k] = f;
  s.torque[k] = tq;
}

inline void integrate(DemCell& cell, const PhysParams& params, double dt, std::size_t k) {
  auto& s = cell.scratch();
  Floe& f = cell.floes()[k];
  const double m = floe_mass(f, params);
  const double I = floe_inertia(f, params);
  f.x += f.vx * dt;
  f.y += f.vy * dt;
  f.theta += f.omega * dt;
  f.vx += s.force[k].x / m * dt;
  f.vy += s.force[k].y / m * dt;
  f.omega += s.torque[k] / I * dt;
  cell.wrap(f);
}

StepTotals finish(const DemCell& cell, StepTotals totals) {
  const auto floes = cell.floes();
  for (std::size_t k = 0; k < floes.size(); ++k) {
    const Floe& f = floes[k];
    if (!std::isfinite(f.x) || !std::isfinite(f.y) || !std::isfinite(f.vx) ||
        !std::isfinite(f.vy) || !std::isfinite(f.omega) || !std::isfinite(f.theta))
      throw DivergenceError(fmt::format("DEM state became non-finite at floe {}", k), k);
    totals.max_abs_omega = std::max(totals.max_abs_omega, std::abs(f.omega));
  }
  return totals;
}

StepTotals pre_step_sums(const DemCell& cell) {
  StepTotals t;
  const auto& s = cell.scratch();
  const auto floes = cell.floes();
  for (std::size_t k = 0; k < floes.size(); ++k) {
    t.sum_velocity = t.sum_velocity + floes[k].vel();
    t.sum_omega += floes[k].omega;
    t.drag_force = t.drag_force + s.force[k];
    t.drag_torque += s.torque[k];
  }
  return t;
}

} // namespace

StepTotals step_dem(DemCell& cell, const OceanField& ocean, const PhysParams& params, double dt,
                    const StepOptions& opts) {
  if (!(dt > 0.0)) throw ConfigError("DEM time step must be positive");
  auto& s = cell.scratch();
  const std::size_t n = cell.size();
  s.pairs = neighbor_pairs(cell);
  s.force.assign(n, Vec2{});
  s.torque.assign(n, 0.0);
  if (opts.drag) {
    for (std::size_t k = 0; k < n; ++k) {
      s.force[k] = drag_force(cell.floes()[k], ocean, params);
      s.torque[k] = drag_torque(cell.floes()[k], ocean, params);
    }
  }
  StepTotals totals = pre_step_sums(cell);
  totals.contacts = s.pairs.size();

  s.pair_forces.resize(s.pairs.size());
  for (std::size_t q = 0; q < s.pairs.size(); ++q)
    s.pair_forces[q] = contact_forces(s.pairs[q], cell.floes(), params, opts.strict_engulfment);
  build_incidence(cell, s.pairs);
  for (std::size_t k = 0; k < n; ++k) sum_incident(cell, s.pairs, k);

  for (std::size_t k = 0; k < n; ++k) integrate(cell, params, dt, k);
  return finish(cell, totals);
}

StepTotals step_dem_parallel(DemCell& cell, const OceanField& ocean, const PhysParams& params,
                             double dt, const StepOptions& opts) {
  if (!(dt > 0.0)) throw ConfigError("DEM time step must be positive");
  auto& s = cell.scratch();
  const auto n = static_cast<long long>(cell.size());
  s.pairs = neighbor_pairs_parallel(cell);
  s.force.assign(cell.size(), Vec2{});
  s.torque.assign(cell.size(), 0.0);
  if (opts.drag) {
#pragma omp parallel for schedule(static)
    for (long long k = 0; k < n; ++k) {
      s.force[k] = drag_force(cell.floes()[k], ocean, params);
      s.torque[k] = drag_torque(cell.floes()[k], ocean, params);
    }
  }
  StepTotals totals = pre_step_sums(cell);
  totals.contacts = s.pairs.size();

  const auto np = static_cast<long long>(s.pairs.size());
  s.pair_forces.resize(s.pairs.size());
  // Exceptions must not escape the parallel region; record the first failure.
  bool failed = false;
  std::string failure;
#pragma omp parallel for schedule(static)
  for (long long q = 0; q < np; ++q) {
    try {
      s.pair_forces[q] = contact_forces(s.pairs[q], cell.floes(), params, opts.strict_engulfment);
    } catch (const DegenerateContactError& e) {
#pragma omp critical(msdem_pair_failure)
      if (!failed) {
        failed = true;
        failure = e.what();
      }
    }
  }
  if (failed) {
    // Re-run serially so the reported pair is the first in canonical order.
    for (const auto& p : s.pairs) contact_forces(p, cell.floes(), params, opts.strict_engulfment);
    throw DegenerateContactError(failure);
  }
  build_incidence(cell, s.pairs);
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < n; ++k) sum_incident(cell, s.pairs, static_cast<std::size_t>(k));

#pragma omp parallel for schedule(static)
  for (long long k = 0; k < n; ++k) integrate(cell, params, dt, static_cast<std::size_t>(k));
  return finish(cell, totals);
}

void write_floes_csv(std::ostream& os, std::span<const Floe> floes) {
  os << "id,r,x,y,theta,vx,vy,omega\n";
  for (std::size_t k = 0; k < floes.size(); ++k) {
    const Floe& f = floes[k];
    fmt::print(os, "{},{},{},{},{},{},{},{}\n", k, f.r, f.x, f.y, f.theta, f.vx, f.vy, f.omega);
  }
}

} // namespace msdem
