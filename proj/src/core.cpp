#include "msdem/core.hpp"

#include <fmt/format.h>

namespace msdem {

void PhysParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(fmt::format("physics parameter {} must be positive, got {}", name, v));
  };
  positive(rho_ice, "rho_ice");
  positive(d_o, "d_o");
  positive(rho_o, "rho_o");
  positive(E, "E");
  positive(G, "G");
  if (!(mu >= 0.0) || !std::isfinite(mu))
    throw ConfigError(fmt::format("friction coefficient mu must be >= 0, got {}", mu));
}

OceanField OceanField::uniform(Vec2 u) {
  return {[u](double, double) { return u; }, [](double, double) { return 0.0; }};
}

double fd_curl(const OceanField& ocean, double x, double y, double h) {
  const double duy_dx = (ocean.velocity(x + h, y).y - ocean.velocity(x - h, y).y) / (2.0 * h);
  const double dux_dy = (ocean.velocity(x, y + h).x - ocean.velocity(x, y - h).x) / (2.0 * h);
  return duy_dx - dux_dy;
}

CoarseGrid::CoarseGrid(Rect domain, int nx, int ny) : domain_(domain), nx_(nx), ny_(ny) {
  if (nx < 1 || ny < 1)
    throw ConfigError(fmt::format("coarse grid needs nx, ny >= 1 (got {}x{})", nx, ny));
  if (!(domain.width() > 0.0) || !(domain.height() > 0.0))
    throw ConfigError("coarse grid domain must have positive extent");
  hx_ = domain.width() / nx;
  hy_ = domain.height() / ny;
}

Rect CoarseGrid::cell_rect(CellIndex c) const {
  return {edge_x(c.i), edge_x(c.i + 1), edge_y(c.j), edge_y(c.j + 1)};
}

Vec2 CoarseGrid::cell_center(CellIndex c) const {
  return {domain_.x0 + (c.i + 0.5) * hx_, domain_.y0 + (c.j + 0.5) * hy_};
}

namespace {

// floor((v - lo) / h), corrected against the edge positions lo + k*h so the
// result agrees exactly with edge_x/edge_y.
int locate(double v, double lo, double h, int n) {
  int k = static_cast<int>(std::floor((v - lo) / h));
  if (k < 0) k = 0;
  if (k > n - 1) k = n - 1;
  while (k < n - 1 && v >= lo + (k + 1) * h) ++k;
  while (k > 0 && v < lo + k * h) --k;
  return k;
}

} // namespace

CellIndex CoarseGrid::cell_of_point(double x, double y) const {
  if (!(x >= domain_.x0 && x <= domain_.x1 && y >= domain_.y0 && y <= domain_.y1))
    throw DomainError(fmt::format("point ({}, {}) lies outside [{}, {}] x [{}, {}]", x, y,
                                  domain_.x0, domain_.x1, domain_.y0, domain_.y1));
  return {locate(x, domain_.x0, hx_, nx_), locate(y, domain_.y0, hy_, ny_)};
}

double wrap_periodic(double v, double lo, double hi) {
  const double L = hi - lo;
  if (v >= lo && v < hi) return v;
  double w = v - L * std::floor((v - lo) / L);
  // floor can land exactly on hi after rounding
  if (w >= hi) w -= L;
  if (w < lo) w = lo;
  return w;
}

} // namespace msdem
