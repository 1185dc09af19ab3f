#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "msdem/core.hpp"
#include "msdem/dem.hpp"

namespace msdem::test {

// Random floes in a rectangle. Radii in [r_lo, r_hi]; velocities and spins
// uniform in [-v, v].
inline std::vector<Floe> random_floes(std::mt19937_64& rng, std::size_t n, Rect box, double r_lo,
                                      double r_hi, double v = 0.0) {
  std::uniform_real_distribution<double> ux(box.x0, box.x1), uy(box.y0, box.y1), ur(r_lo, r_hi),
      uv(-v, v);
  std::vector<Floe> out(n);
  for (auto& f : out) {
    f.r = ur(rng);
    f.x = ux(rng);
    f.y = uy(rng);
    if (v > 0.0) {
      f.vx = uv(rng);
      f.vy = uv(rng);
      f.omega = uv(rng);
    }
  }
  return out;
}

// Like random_floes, but redraws any floe whose disc would sit inside another
// (engulfment), so contacts are always regular lens overlaps.
inline std::vector<Floe> random_packing(std::mt19937_64& rng, std::size_t n, Rect box, double r_lo,
                                        double r_hi, double v = 0.0) {
  std::vector<Floe> out;
  while (out.size() < n) {
    const Floe f = random_floes(rng, 1, box, r_lo, r_hi, v)[0];
    bool ok = true;
    for (const Floe& g : out) {
      double dx = std::abs(f.x - g.x), dy = std::abs(f.y - g.y);
      dx = std::min(dx, box.width() - dx);
      dy = std::min(dy, box.height() - dy);
      if (std::hypot(dx, dy) <= std::abs(f.r - g.r) + 0.25 * std::min(f.r, g.r)) ok = false;
    }
    if (ok) out.push_back(f);
  }
  return out;
}

// Square lattice of k x k floes of radius r filling `box`, moving with (vx, vy).
inline std::vector<Floe> lattice(Rect box, int k, double r, double vx = 0.0, double vy = 0.0) {
  std::vector<Floe> out;
  const double hx = box.width() / k, hy = box.height() / k;
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) {
      Floe f;
      f.r = r;
      f.x = box.x0 + (i + 0.5) * hx;
      f.y = box.y0 + (j + 0.5) * hy;
      f.vx = vx;
      f.vy = vy;
      out.push_back(f);
    }
  return out;
}

inline bool same_bits(const Floe& a, const Floe& b) {
  return a.r == b.r && a.x == b.x && a.y == b.y && a.theta == b.theta && a.vx == b.vx &&
         a.vy == b.vy && a.omega == b.omega;
}

} // namespace msdem::test
