#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "msdem/dem.hpp"
#include "msdem/parallel.hpp"
#include "support.hpp"

using namespace msdem;
using msdem::test::random_floes;
constexpr double pi = std::numbers::pi;

namespace {

ContactPair pair_at(double d) {
  ContactPair p;
  p.d = d;
  return p;
}

// Lens chord from Heron's formula on the (r_l, r_j, d) triangle.
double heron_chord(double rl, double rj, double d) {
  const double s = 0.5 * (rl + rj + d);
  const double area = std::sqrt(s * (s - rl) * (s - rj) * (s - d));
  return 4.0 * area / d;
}

// Lens chord measured on a raster: the widest extent, transverse to the
// center line, of grid points inside both discs.
double raster_chord(double rl, double rj, double d, double h) {
  double lo = 1e300, hi = -1e300;
  for (double x = d - rj; x <= rl; x += h)
    for (double y = -rl; y <= rl; y += h)
      if (x * x + y * y <= rl * rl && (x - d) * (x - d) + y * y <= rj * rj) {
        lo = std::min(lo, y);
        hi = std::max(hi, y);
      }
  return hi - lo;
}

DemCell two_floes(Floe a, Floe b, Rect box = {-10, 10, -10, 10}) {
  return DemCell({a, b}, box, Boundary::open());
}

using PairKey = std::tuple<std::size_t, std::size_t>;
std::set<PairKey> keys(const std::vector<ContactPair>& v) {
  std::set<PairKey> s;
  for (const auto& p : v) s.insert({p.l, p.j});
  return s;
}

// Overlap test that tries all nine periodic images explicitly.
std::set<PairKey> image_scan(const DemCell& cell) {
  std::set<PairKey> s;
  const auto f = cell.floes();
  const Rect& b = cell.subdomain();
  for (std::size_t l = 0; l < f.size(); ++l)
    for (std::size_t j = l + 1; j < f.size(); ++j) {
      double best = 1e300;
      for (int ox = -1; ox <= 1; ++ox)
        for (int oy = -1; oy <= 1; ++oy) {
          if ((ox != 0 && !cell.boundary().periodic_x) || (oy != 0 && !cell.boundary().periodic_y)) continue;
          best = std::min(best, std::hypot(f[l].x - f[j].x + ox * b.width(), f[l].y - f[j].y + oy * b.height()));
        }
      if (best < f[l].r + f[j].r) s.insert({l, j});
    }
  return s;
}

} // namespace

TEST_CASE("neighbor_pairs examples") {
  Floe a, b;
  a.r = b.r = 1.0;
  b.x = 3.0;
  CHECK(neighbor_pairs(two_floes(a, b)).empty());

  b.x = 1.5;
  const auto pairs = neighbor_pairs(two_floes(a, b));
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].l == 0);
  CHECK(pairs[0].j == 1);
  CHECK(pairs[0].delta == doctest::Approx(-0.5));
  // n_hat points from j toward l.
  CHECK(pairs[0].n_hat == Vec2{-1.0, 0.0});
  CHECK(dot(pairs[0].n_hat, pairs[0].t_hat) == 0.0);
}

TEST_CASE("neighbor_pairs matches the all-pairs scan on random instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 10 + static_cast<std::size_t>(trial) * 12;  // up to 478
    const Rect box{0.0, 1.0 + 0.1 * (trial % 3), -0.5, 0.5};
    const Boundary bc = trial % 2 ? Boundary::doubly_periodic() : Boundary{false, true};
    const double r_hi = 0.02 + 0.002 * (trial % 7);
    DemCell cell(random_floes(rng, n, box, 0.2 * r_hi, r_hi), box, bc);
    const auto fast = neighbor_pairs(cell);
    const auto par = neighbor_pairs_parallel(cell);
    const auto brute = neighbor_pairs_brute_force(cell);
    CHECK(keys(fast) == keys(brute));
    CHECK(keys(fast) == image_scan(cell));
    CHECK(keys(par) == keys(fast));
    CHECK(fast.size() == keys(fast).size());
    REQUIRE(par.size() == fast.size());
    for (std::size_t k = 0; k < fast.size(); ++k) {
      CHECK(fast[k].l < fast[k].j);
      CHECK(fast[k].delta < 0.0);
      CHECK(par[k].l == fast[k].l);
      CHECK(par[k].j == fast[k].j);
      if (k > 0) CHECK(std::tie(fast[k - 1].l, fast[k - 1].j) < std::tie(fast[k].l, fast[k].j));
    }
  }
}

TEST_CASE("exactly 500 floes") {
  std::mt19937_64 rng(500);
  const Rect box{0, 1, 0, 1};
  DemCell cell(random_floes(rng, 500, box, 0.005, 0.03), box, Boundary::doubly_periodic());
  CHECK(keys(neighbor_pairs(cell)) == image_scan(cell));
}

TEST_CASE("pairs across the periodic seam use the minimum image") {
  Floe a, b;
  a.r = b.r = 0.1;
  a.x = 0.02;
  b.x = 0.95;
  a.y = b.y = 0.5;
  DemCell cell({a, b}, {0, 1, 0, 1}, Boundary::doubly_periodic());
  const auto pairs = neighbor_pairs(cell);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].d == doctest::Approx(0.07));
  CHECK(pairs[0].n_hat.x == doctest::Approx(1.0));
}

TEST_CASE("small periodic cells are rejected") {
  Floe a;
  a.r = 0.3;
  a.x = a.y = 0.5;
  DemCell cell({a}, {0, 1, 0, 1}, Boundary::doubly_periodic());
  CHECK_THROWS_AS(neighbor_pairs(cell), ConfigError);
  DemCell open({a}, {0, 1, 0, 1}, Boundary::open());
  CHECK_NOTHROW(neighbor_pairs(open));
}

TEST_CASE("chord length") {
  CHECK(chord_length(pair_at(2.0), 1.0, 1.0) == 0.0);
  CHECK(chord_length(pair_at(1.0), 1.0, 1.0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
  CHECK(raster_chord(1.0, 1.0, 1.0, 1e-3) == doctest::Approx(std::sqrt(3.0)).epsilon(2e-3));

  const double c = chord_length(pair_at(1.2), 1.0, 0.5);
  CHECK(c == doctest::Approx(chord_length(pair_at(1.2), 0.5, 1.0)).epsilon(1e-14));
  CHECK(c == doctest::Approx(heron_chord(1.0, 0.5, 1.2)).epsilon(1e-12));
  CHECK(c == doctest::Approx(raster_chord(1.0, 0.5, 1.2, 5e-4)).epsilon(5e-3));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (int k = 0; k < 200; ++k) {
    const double rl = u(rng), rj = u(rng);
    const double lo = std::abs(rl - rj), hi = rl + rj;
    const double d = lo + (hi - lo) * std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    CHECK(chord_length(pair_at(d), rl, rj) == doctest::Approx(heron_chord(rl, rj, d)).epsilon(1e-9));
  }
}

TEST_CASE("engulfment") {
  ContactPair p = pair_at(0.4);
  CHECK_THROWS_AS(chord_length(p, 1.0, 0.5), DegenerateContactError);
  CHECK(chord_length(p, 1.0, 0.5, false) == 1.0);
  CHECK(chord_length(pair_at(0.0), 0.3, 0.3, false) == doctest::Approx(0.6));

  Floe a, b;
  a.r = 1.0;
  b.r = 0.5;
  b.x = 0.4;
  DemCell cell = two_floes(a, b);
  CHECK_THROWS_AS(step_dem(cell, OceanField::uniform({}), PhysParams{}, 1e-3), DegenerateContactError);
  CHECK_NOTHROW(step_dem(cell, OceanField::uniform({}), PhysParams{}, 1e-3, {true, false}));
}

TEST_CASE("contact forces of stationary and head-on pairs") {
  PhysParams prm;
  Floe a, b;
  a.r = b.r = 1.0;
  b.x = 1.9;
  const DemCell cell = two_floes(a, b);
  const auto pairs = neighbor_pairs(cell);
  REQUIRE(pairs.size() == 1);
  ContactForce f = contact_forces(pairs[0], cell.floes(), prm);
  const double c = heron_chord(1.0, 1.0, 1.9);
  CHECK(f.fn_l.norm() == doctest::Approx(c * prm.E * 0.1).epsilon(1e-12));
  CHECK(f.fn_l.x < 0.0);  // pushes l away from j
  CHECK(f.ft_l == Vec2{});
  CHECK(f.torque_l == 0.0);
  CHECK(f.torque_j == 0.0);

  a.vx = 0.5;
  b.vx = -0.5;
  const DemCell moving = two_floes(a, b);
  f = contact_forces(neighbor_pairs(moving)[0], moving.floes(), prm);
  CHECK(f.ft_l.norm() == 0.0);
}

TEST_CASE("spinning pair against a hand-coded reference") {
  for (double G : {1.0, 1e4}) {
    PhysParams prm;
    prm.G = G;
    Floe a, b;
    a.r = b.r = 1.0;
    b.x = 1.9;
    a.omega = b.omega = 1.0;
    const DemCell cell = two_floes(a, b);
    const auto f = contact_forces(neighbor_pairs(cell)[0], cell.floes(), prm);
    // Contact point at x = 0.95 on both arms; both surfaces move along -y/+y.
    const double c = heron_chord(1.0, 1.0, 1.9);
    const double vt = 0.95 + 0.95;
    const double expect = std::min(c * G * vt, prm.mu * c * prm.E * 0.1);
    CHECK(f.ft_l.norm() == doctest::Approx(expect).epsilon(1e-12));
    CHECK(f.torque_l == doctest::Approx(-0.95 * dot(f.ft_l, neighbor_pairs(cell)[0].t_hat)).epsilon(1e-12));
    CHECK(f.torque_j == doctest::Approx(f.torque_l).epsilon(1e-12));
  }
}

TEST_CASE("one step of a colliding pair against a hand-coded integrator") {
  PhysParams prm;
  prm.G = 3.0;
  prm.mu = 0.5;
  Floe a, b;
  a.r = 0.6;
  b.r = 0.45;
  a.x = 0.1;
  a.y = 0.2;
  b.x = 0.9;
  b.y = 0.55;
  a.vx = 0.3;
  a.vy = -0.1;
  b.vx = -0.2;
  b.vy = 0.05;
  a.omega = 0.7;
  b.omega = -0.4;
  DemCell cell = two_floes(a, b);
  const double dt = 1e-3;
  step_dem(cell, OceanField::uniform({}), prm, dt, {false, true});

  // Reference, written out from the model equations.
  const double dx = a.x - b.x, dy = a.y - b.y, d = std::hypot(dx, dy);
  const double nx = dx / d, ny = dy / d, tx = -ny, ty = nx;
  const double c = heron_chord(a.r, b.r, d);
  const double fn = c * prm.E * (a.r + b.r - d);
  const double arm_a = 0.5 * (d + a.r - b.r), arm_b = 0.5 * (d - a.r + b.r);
  const double vt = (b.vx - a.vx) * tx + (b.vy - a.vy) * ty + arm_b * b.omega + arm_a * a.omega;
  double ft = c * prm.G * vt;
  ft = std::clamp(ft, -prm.mu * fn, prm.mu * fn);
  const double Fx = fn * nx + ft * tx, Fy = fn * ny + ft * ty;
  const double ma = pi * a.r * a.r, mb = pi * b.r * b.r;
  const double Ia = ma * a.r * a.r, Ib = mb * b.r * b.r;

  const auto f = cell.floes();
  CHECK(f[0].x == doctest::Approx(a.x + a.vx * dt).epsilon(1e-14));
  CHECK(f[1].y == doctest::Approx(b.y + b.vy * dt).epsilon(1e-14));
  CHECK(f[0].vx == doctest::Approx(a.vx + Fx / ma * dt).epsilon(1e-12));
  CHECK(f[0].vy == doctest::Approx(a.vy + Fy / ma * dt).epsilon(1e-12));
  CHECK(f[1].vx == doctest::Approx(b.vx - Fx / mb * dt).epsilon(1e-12));
  CHECK(f[1].vy == doctest::Approx(b.vy - Fy / mb * dt).epsilon(1e-12));
  CHECK(f[0].omega == doctest::Approx(a.omega - arm_a * ft / Ia * dt).epsilon(1e-12));
  CHECK(f[1].omega == doctest::Approx(b.omega - arm_b * ft / Ib * dt).epsilon(1e-12));
  CHECK(f[0].theta == doctest::Approx(a.omega * dt));
}

TEST_CASE("Newton pairs and the Coulomb cap on random packings") {
  std::mt19937_64 rng(11);
  const Rect box{0, 1, 0, 1};
  for (int trial = 0; trial < 20; ++trial) {
    PhysParams prm;
    prm.G = trial % 2 ? 1.0 : 1e5;  // large G saturates the cap
    prm.mu = 0.1 * (trial % 5);
    DemCell cell(msdem::test::random_packing(rng, 300, box, 0.01, 0.04, 0.5), box, Boundary::doubly_periodic());
    for (const auto& p : neighbor_pairs(cell)) {
      const auto f = contact_forces(p, cell.floes(), prm);
      const double fn = f.fn_l.norm();
      CHECK(f.ft_l.norm() <= prm.mu * fn + 1e-12);
      // the same contact evaluated from j's side
      ContactPair mirror = p;
      std::swap(mirror.l, mirror.j);
      mirror.n_hat = -p.n_hat;
      mirror.t_hat = -p.t_hat;
      const auto g = contact_forces(mirror, cell.floes(), prm);
      const Vec2 sum = f.fn_l + f.ft_l + g.fn_l + g.ft_l;
      CHECK(sum.norm() <= 1e-12 * std::max(1.0, fn));
    }
  }
}

TEST_CASE("drag force and torque") {
  PhysParams prm;
  Floe f;
  f.r = 1.0;
  const OceanField o = OceanField::uniform({0.3, 0.0});
  const Vec2 d = drag_force(f, o, prm);
  CHECK(d.x == doctest::Approx(0.09 * pi).epsilon(1e-15));
  CHECK(d.y == 0.0);
  f.vx = 0.3;
  CHECK(drag_force(f, o, prm) == Vec2{});

  // Odd and quadratic in the relative velocity.
  f.vx = 0.0;
  const OceanField o2 = OceanField::uniform({-0.6, 0.0});
  CHECK(drag_force(f, o2, prm).x == doctest::Approx(-4.0 * d.x));

  f.omega = 1.0;
  CHECK(drag_torque(f, o, prm) == doctest::Approx(-pi).epsilon(1e-15));
  OceanField spin{[](double, double) { return Vec2{}; }, [](double, double) { return 0.8; }};
  f.omega = 0.4;
  CHECK(drag_torque(f, spin, prm) == 0.0);
}

TEST_CASE("force-free translation") {
  Floe a;
  a.r = 0.01;
  a.x = 0.5;
  a.y = 0.5;
  a.vx = 0.3;
  DemCell cell({a}, {0, 1, 0, 1}, Boundary::doubly_periodic());
  step_dem(cell, OceanField::uniform({0.3, 0.0}), PhysParams{}, 1e-4);
  CHECK(cell.floes()[0].x == a.x + a.vx * 1e-4);
  CHECK(cell.floes()[0].vx == 0.3);
  CHECK(cell.floes()[0].vy == 0.0);
}

TEST_CASE("drag-free momentum conservation") {
  std::mt19937_64 rng(5);
  const Rect box{0, 1, 0, 1};
  PhysParams prm;
  DemCell cell(msdem::test::random_packing(rng, 400, box, 0.01, 0.04, 0.5), box, Boundary::doubly_periodic());
  auto momentum = [&] {
    Vec2 p;
    for (const auto& f : cell.floes()) p = p + f.vel() * floe_mass(f, prm);
    return p;
  };
  for (int s = 0; s < 50; ++s) {
    const Vec2 p0 = momentum();
    const auto t = step_dem(cell, OceanField::uniform({0.2, 0.1}), prm, 1e-4, {false, false});
    if (s == 0) CHECK(t.contacts > 0);
    const Vec2 p1 = momentum();
    double scale = 0.0;
    for (const auto& f : cell.floes()) scale += floe_mass(f, prm) * f.vel().norm();
    CHECK((p1 - p0).norm() <= 1e-12 * scale);
  }
}

TEST_CASE("angular momentum drift on a two-floe collision is second order in dt") {
  // Per-step drift of sum(m x cross v + I omega) over a glancing collision.
  auto max_drift = [](double dt) {
    PhysParams prm;
    prm.G = 2.0;
    Floe a, b;
    a.r = 0.5;
    b.r = 0.4;
    a.x = 0.0;
    b.x = 0.85;
    b.y = 0.2;
    a.vx = 0.3;
    b.vx = -0.3;
    a.omega = 0.5;
    DemCell cell = two_floes(a, b);
    auto L = [&] {
      double s = 0.0;
      for (const auto& f : cell.floes())
        s += floe_mass(f, prm) * cross(f.pos(), f.vel()) + floe_inertia(f, prm) * f.omega;
      return s;
    };
    double worst = 0.0;
    for (int k = 0; k < static_cast<int>(0.02 / dt); ++k) {
      const double l0 = L();
      step_dem(cell, OceanField::uniform({}), prm, dt, {false, true});
      worst = std::max(worst, std::abs(L() - l0));
    }
    return worst;
  };
  const double d1 = max_drift(1e-4);
  const double d2 = max_drift(5e-5);
  CHECK(d1 > 0.0);
  CHECK(d1 / d2 == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("periodic wrap keeps centers inside and distances translation invariant") {
  std::mt19937_64 rng(9);
  const Rect box{0, 1, 0, 2};
  DemCell cell(msdem::test::random_packing(rng, 200, box, 0.01, 0.03, 2.0), box, Boundary::doubly_periodic());
  StepOptions loose;
  loose.strict_engulfment = false;
  for (int s = 0; s < 200; ++s) step_dem(cell, OceanField::uniform({1.0, -1.5}), PhysParams{}, 1e-3, loose);
  for (const auto& f : cell.floes()) {
    CHECK(f.x >= 0.0);
    CHECK(f.x < 1.0);
    CHECK(f.y >= 0.0);
    CHECK(f.y < 2.0);
  }
  const Vec2 a{0.05, 0.1}, b{0.93, 1.95};
  const Vec2 s0 = cell.separation(a, b);
  const Vec2 s1 = cell.separation(a + Vec2{0.37, 0.81}, b + Vec2{0.37, 0.81});
  CHECK(s0.x == doctest::Approx(s1.x).epsilon(1e-12));
  CHECK(s0.y == doctest::Approx(s1.y).epsilon(1e-12));
  CHECK(s0.x == doctest::Approx(0.12));
  CHECK(s0.y == doctest::Approx(0.15));
}

TEST_CASE("divergence names the floe") {
  Floe a, b;
  a.r = b.r = 0.1;
  b.x = 0.05;
  b.r = 0.12;
  Floe far;
  far.r = 0.1;
  far.x = 5.0;
  DemCell cell({far, a, b}, {-10, 10, -10, 10}, Boundary::open());
  PhysParams prm;
  prm.E = 1e308;
  try {
    step_dem(cell, OceanField::uniform({}), prm, 1e10);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("serial and parallel steps agree bit for bit") {
  std::mt19937_64 rng(77);
  const Rect box{0, 2, 0, 1};
  const auto floes = msdem::test::random_packing(rng, 1500, box, 0.005, 0.02, 0.3);
  OceanField o{[](double x, double y) { return Vec2{0.3 - 0.1 * std::cos(x), 0.05 * std::sin(3 * y)}; },
               [](double x, double y) { return 0.1 * std::sin(x) + 0.0 * y; }};
  DemCell serial(floes, box, Boundary::doubly_periodic());
  for (int s = 0; s < 20; ++s) step_dem(serial, o, PhysParams{}, 1e-4);
  for (int w : {1, 2, 8}) {
    ScopedWorkers scoped(w);
    DemCell par(floes, box, Boundary::doubly_periodic());
    for (int s = 0; s < 20; ++s) step_dem_parallel(par, o, PhysParams{}, 1e-4);
    bool all_same = true;
    for (std::size_t k = 0; k < floes.size(); ++k)
      all_same = all_same && msdem::test::same_bits(serial.floes()[k], par.floes()[k]);
    CHECK_MESSAGE(all_same, "workers = " << w);
  }
}

TEST_CASE("parallel step reports engulfment") {
  Floe a, b;
  a.r = 1.0;
  b.r = 0.5;
  b.x = 0.4;
  DemCell cell = two_floes(a, b);
  CHECK_THROWS_AS(step_dem_parallel(cell, OceanField::uniform({}), PhysParams{}, 1e-3),
                  DegenerateContactError);
}

TEST_CASE("floe CSV") {
  Floe a;
  a.r = 0.5;
  a.x = 1.25;
  a.vx = 0.1;
  std::ostringstream os;
  write_floes_csv(os, std::vector<Floe>{a});
  CHECK(os.str() == "id,r,x,y,theta,vx,vy,omega\n0,0.5,1.25,0,0,0.1,0,0\n");
}
