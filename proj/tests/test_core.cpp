#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "msdem/core.hpp"

using namespace msdem;
constexpr double pi = std::numbers::pi;

TEST_CASE("floe mass and inertia") {
  PhysParams p;
  CHECK(floe_mass(1.0, p) == doctest::Approx(pi).epsilon(1e-15));
  CHECK(floe_mass(1.0 / 240.0, p) == doctest::Approx(pi / 57600.0).epsilon(1e-14));
  p.rho_ice = 2.0;
  CHECK(floe_mass(0.5, p) == doctest::Approx(pi / 2.0).epsilon(1e-15));
  CHECK(floe_inertia(0.5, p) == doctest::Approx(pi / 8.0).epsilon(1e-15));

  Floe f;
  f.r = 0.5;
  CHECK(floe_mass(f, p) == floe_mass(0.5, p));
}

TEST_CASE("physics parameters are validated") {
  PhysParams p;
  CHECK_NOTHROW(p.validate());
  p.mu = 0.0;
  CHECK_NOTHROW(p.validate());
  p.mu = -0.1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.E = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.rho_o = std::nan("");
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("vector helpers") {
  const Vec2 a{3.0, 4.0};
  CHECK(a.norm() == 5.0);
  CHECK(dot(a, perp(a)) == 0.0);
  CHECK(cross(Vec2{1, 0}, Vec2{0, 1}) == 1.0);
  CHECK(perp(Vec2{1, 0}) == Vec2{0, 1});
}

TEST_CASE("coarse grid geometry") {
  const CoarseGrid g({0, 4, 0, 2}, 48, 24);
  CHECK(g.hx() == doctest::Approx(1.0 / 12.0));
  CHECK(g.hy() == doctest::Approx(1.0 / 12.0));
  CHECK(g.dX() == doctest::Approx(std::sqrt(2.0) / 12.0));
  CHECK(g.size() == 48 * 24);

  const CoarseGrid g64({0, 4, 0, 2}, 64, 32);
  CHECK(std::abs(g64.dX() - std::sqrt(2.0) / 16.0) < 1e-15);

  CHECK_THROWS_AS(CoarseGrid({0, 4, 0, 2}, 0, 3), ConfigError);
  CHECK_THROWS_AS(CoarseGrid({0, 0, 0, 2}, 2, 3), ConfigError);

  for (int k = 0; k < g.size(); ++k) CHECK(g.flat(g.unflat(k)) == k);
  const Rect r = g.cell_rect({3, 5});
  CHECK(r.x0 == doctest::Approx(0.25));
  CHECK(r.y1 == doctest::Approx(0.5));
}

TEST_CASE("cell_of_point examples") {
  const CoarseGrid g({0, 4, 0, 2}, 48, 24);
  const double eps = 1e-12;
  CHECK(g.cell_of_point(0.0, 0.0) == CellIndex{0, 0});
  CHECK(g.cell_of_point(4.0 - eps, 2.0 - eps) == CellIndex{47, 23});
  CHECK(g.cell_of_point(1.0 / 12.0, 1.0) == CellIndex{1, 12});
  CHECK(g.cell_of_point(4.0, 2.0) == CellIndex{47, 23});
  CHECK_THROWS_AS(g.cell_of_point(4.0 + eps, 1.0), DomainError);
  CHECK_THROWS_AS(g.cell_of_point(1.0, -eps), DomainError);
}

TEST_CASE("every interior edge belongs to the higher-index cell") {
  const CoarseGrid g({0, 4, 0, 2}, 48, 24);
  for (int i = 1; i < 48; ++i) CHECK(g.cell_of_point(g.edge_x(i), 0.5).i == i);
  for (int j = 1; j < 24; ++j) CHECK(g.cell_of_point(0.5, g.edge_y(j)).j == j);
}

TEST_CASE("cell_of_point partitions the domain") {
  const CoarseGrid g({-1, 3, 0.5, 2.5}, 13, 7);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ux(-1, 3), uy(0.5, 2.5);
  for (int k = 0; k < 2000; ++k) {
    const double x = ux(rng), y = uy(rng);
    const CellIndex c = g.cell_of_point(x, y);
    const Rect r = g.cell_rect(c);
    CHECK(x >= r.x0);
    CHECK(y >= r.y0);
    CHECK((x < r.x1 || c.i == 12));
    CHECK((y < r.y1 || c.j == 6));
  }
}

TEST_CASE("wrap_periodic") {
  CHECK(wrap_periodic(0.5, 0, 1) == 0.5);
  CHECK(wrap_periodic(1.0, 0, 1) == 0.0);
  CHECK(wrap_periodic(-0.25, 0, 1) == doctest::Approx(0.75));
  CHECK(wrap_periodic(5.5, 1, 3) == doctest::Approx(1.5));
  const double w = wrap_periodic(-1e-18, 0, 1);
  CHECK(w >= 0.0);
  CHECK(w < 1.0);
}

TEST_CASE("uniform ocean and finite-difference curl") {
  const OceanField o = OceanField::uniform({0.3, -0.1});
  CHECK(o.at({1, 2}) == Vec2{0.3, -0.1});
  CHECK(o.curl_at({1, 2}) == 0.0);
  CHECK(std::abs(fd_curl(o, 1, 2)) < 1e-12);

  // Solid-body rotation u = (-y, x) has curl 2.
  OceanField rot{[](double x, double y) { return Vec2{-y, x}; }, [](double, double) { return 2.0; }};
  CHECK(fd_curl(rot, 0.3, 0.7) == doctest::Approx(2.0).epsilon(1e-9));
}
