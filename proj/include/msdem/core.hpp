#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <vector>

#include "msdem/errors.hpp"

namespace msdem {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr bool operator==(const Vec2&) const = default;

  double norm() const { return std::hypot(x, y); }
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
/// z-component of the planar cross product.
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
/// Rotates by +90 degrees.
constexpr Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

/// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
};

/// Material and forcing constants. Nondimensional; unit floe thickness.
struct PhysParams {
  double rho_ice = 1.0;
  double d_o = 1.0;   // ocean drag coefficient
  double rho_o = 1.0; // ocean density
  double E = 100.0;   // Young's bulk modulus (normal contact stiffness)
  double G = 1.0;     // Young's shear modulus (tangential contact)
  double mu = 0.3;    // Coulomb friction coefficient

  /// Throws ConfigError unless every field is positive (mu may be zero).
  void validate() const;
};

/// Lagrangian state of one cylindrical floe.
struct Floe {
  double r = 0.0;
  double x = 0.0, y = 0.0;
  double theta = 0.0;
  double vx = 0.0, vy = 0.0;
  double omega = 0.0;

  Vec2 pos() const { return {x, y}; }
  Vec2 vel() const { return {vx, vy}; }
};

inline double floe_mass(double r, const PhysParams& p) {
  return p.rho_ice * std::numbers::pi * r * r;
}
inline double floe_mass(const Floe& f, const PhysParams& p) { return floe_mass(f.r, p); }

inline double floe_inertia(double r, const PhysParams& p) { return floe_mass(r, p) * r * r; }
inline double floe_inertia(const Floe& f, const PhysParams& p) { return floe_inertia(f.r, p); }

/// Prescribed ocean surface velocity and the z-component of its curl.
/// Both callables must be pure and thread-safe.
struct OceanField {
  std::function<Vec2(double, double)> velocity;
  std::function<double(double, double)> curl_z;

  Vec2 at(Vec2 p) const { return velocity(p.x, p.y); }
  double curl_at(Vec2 p) const { return curl_z(p.x, p.y); }

  static OceanField uniform(Vec2 u);
};

/// Central finite-difference estimate of the curl; used to check ocean fields.
double fd_curl(const OceanField& ocean, double x, double y, double h = 1e-5);

struct CellIndex {
  int i = 0;
  int j = 0;
  constexpr bool operator==(const CellIndex&) const = default;
};

/// Uniform coarse grid over a rectangle. Cell (i,j) covers
/// [x0 + i*hx, x0 + (i+1)*hx] x [y0 + j*hy, y0 + (j+1)*hy].
class CoarseGrid {
public:
  CoarseGrid() = default;
  CoarseGrid(Rect domain, int nx, int ny);

  const Rect& domain() const { return domain_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int size() const { return nx_ * ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double cell_area() const { return hx_ * hy_; }
  /// Cell diagonal; the length scale used by the CFL bound.
  double dX() const { return std::hypot(hx_, hy_); }

  double edge_x(int i) const { return domain_.x0 + i * hx_; }
  double edge_y(int j) const { return domain_.y0 + j * hy_; }
  Rect cell_rect(CellIndex c) const;
  Vec2 cell_center(CellIndex c) const;

  /// Row-major flat index (rows along y).
  int flat(CellIndex c) const { return c.j * nx_ + c.i; }
  CellIndex unflat(int k) const { return {k % nx_, k / nx_}; }

  /// Cell containing (x,y). Points on an interior edge belong to the
  /// higher-index cell; the closed outer boundary maps to the edge cells.
  /// Throws DomainError for points outside the domain.
  CellIndex cell_of_point(double x, double y) const;

  bool operator==(const CoarseGrid& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_ && domain_.x0 == o.domain_.x0 &&
           domain_.x1 == o.domain_.x1 && domain_.y0 == o.domain_.y0 &&
           domain_.y1 == o.domain_.y1;
  }

private:
  Rect domain_{};
  int nx_ = 1, ny_ = 1;
  double hx_ = 1.0, hy_ = 1.0;
};

/// One scalar per coarse cell, row-major.
struct CellField {
  CoarseGrid grid;
  std::vector<double> values;

  double at(CellIndex c) const { return values[static_cast<std::size_t>(grid.flat(c))]; }
};

/// Maps v into [lo, hi) by whole-period shifts.
double wrap_periodic(double v, double lo, double hi);

} // namespace msdem
