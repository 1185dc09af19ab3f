#include "msdem/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace msdem {

namespace {
constexpr double kPi = std::numbers::pi;
} // namespace

ScenarioId parse_scenario(std::string_view s) {
  if (s == "s41") return ScenarioId::S41;
  if (s == "s42") return ScenarioId::S42;
  if (s == "s43") return ScenarioId::S43;
  if (s == "s44") return ScenarioId::S44;
  throw ConfigError(fmt::format("unknown scenario '{}' (expected s41, s42, s43 or s44)", s));
}

std::string to_string(ScenarioId id) {
  switch (id) {
  case ScenarioId::S41: return "s41";
  case ScenarioId::S42: return "s42";
  case ScenarioId::S43: return "s43";
  case ScenarioId::S44: return "s44";
  }
  throw ConfigError("unknown scenario id");
}

double ScenarioSpec::radius_at(double x) const {
  return r_c * (0.2 + 0.8 * std::sin(0.25 * kPi * x));
}

ScenarioSpec make_scenario(ScenarioId id, double scale) {
  const double nx = 480.0 * scale;
  const double ny = 240.0 * scale;
  if (!(scale > 0.0) || scale > 1.0 || std::abs(nx - std::round(nx)) > 1e-9 ||
      std::abs(ny - std::round(ny)) > 1e-9 || std::round(ny) < 1.0)
    throw ConfigError(fmt::format("scale {} does not give a whole floe lattice", scale));

  ScenarioSpec s;
  s.id = id;
  s.scale = scale;
  s.nx_f = static_cast<int>(std::lround(nx));
  s.ny_f = static_cast<int>(std::lround(ny));
  s.r_c = 1.0 / s.ny_f;
  s.boundary = Boundary::doubly_periodic();

  switch (id) {
  case ScenarioId::S41:
  case ScenarioId::S44:
    s.ocean = OceanField::uniform({0.3, 0.0});
    break;
  case ScenarioId::S42:
    s.ocean.velocity = [](double x, double) { return Vec2{0.3 - 0.1 * std::cos(kPi * x), 0.0}; };
    s.ocean.curl_z = [](double, double) { return 0.0; };
    break;
  case ScenarioId::S43:
    s.ocean.velocity = [](double x, double y) {
      return Vec2{0.3 - 0.1 * std::sin(0.1 * kPi * x) * std::cos(kPi * y),
                  0.05 * std::cos(0.1 * kPi * x) * std::sin(kPi * y)};
    };
    // d/dx(0.05 cos(0.1 pi x) sin(pi y)) - d/dy(-0.1 sin(0.1 pi x) cos(pi y))
    s.ocean.curl_z = [](double x, double y) {
      return (-0.005 * kPi - 0.1 * kPi) * std::sin(0.1 * kPi * x) * std::sin(kPi * y);
    };
    break;
  }
  if (id == ScenarioId::S44) {
    s.boundary = {false, true};
    s.right_wall = true;
    s.continuum_bc = ContinuumBc::WallX;
  }
  return s;
}

std::vector<Floe> initial_floes(const ScenarioSpec& spec) {
  const double hx = spec.domain.width() / spec.nx_f;
  const double hy = spec.domain.height() / spec.ny_f;
  std::vector<Floe> floes;
  floes.reserve(static_cast<std::size_t>(spec.nx_f) * static_cast<std::size_t>(spec.ny_f));
  for (int j = 0; j < spec.ny_f; ++j) {
    for (int i = 0; i < spec.nx_f; ++i) {
      Floe f;
      f.x = spec.domain.x0 + (i + 0.5) * hx;
      f.y = spec.domain.y0 + (j + 0.5) * hy;
      f.r = spec.radius_at(f.x);
      const Vec2 u = spec.ocean.velocity(f.x, f.y);
      f.vx = u.x;
      f.vy = u.y;
      floes.push_back(f);
    }
  }
  return floes;
}

void apply_right_wall(std::span<Floe> floes, double x1) {
  for (Floe& f : floes) {
    if (f.x + f.r >= x1) {
      f.vx = std::min(f.vx, 0.0);
      f.x = std::min(f.x, x1 - f.r);
    }
  }
}

FullDemResult run_full_dem(const ScenarioSpec& spec, double T, const FullDemOptions& opts) {
  const auto t_start = std::chrono::steady_clock::now();
  opts.params.validate();
  if (!(opts.dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(T >= 0.0)) throw ConfigError("final time must be non-negative");
  const long long steps = std::llround(T / opts.dt);
  if (std::abs(steps * opts.dt - T) > 1e-9 * std::max(1.0, T))
    throw ConfigError(fmt::format("T = {} is not a whole number of steps dt = {}", T, opts.dt));
  std::vector<long long> snap_steps;
  for (double t : opts.snapshot_times) {
    const long long k = std::llround(t / opts.dt);
    if (k < 0 || k > steps || std::abs(k * opts.dt - t) > 1e-9 * std::max(1.0, t))
      throw ConfigError(fmt::format("snapshot time {} is not a step within [0, {}]", t, T));
    snap_steps.push_back(k);
  }

  // The wall clamp parks floes at x1 - r, which puts two clamped floes of a
  // row at d = |r_l - r_j|; engulfment is routine there.
  StepOptions step = opts.step;
  if (spec.right_wall) step.strict_engulfment = false;

  DemCell cell(initial_floes(spec), spec.domain, spec.boundary);
  FullDemResult result;
  auto take = [&](long long k) {
    if (std::find(snap_steps.begin(), snap_steps.end(), k) != snap_steps.end())
      result.snapshots.push_back({static_cast<double>(k) * opts.dt,
                                  std::vector<Floe>(cell.floes().begin(), cell.floes().end())});
  };
  for (const Floe& f : cell.floes()) result.max_abs_omega = std::max(result.max_abs_omega, std::abs(f.omega));
  take(0);
  if (opts.observer) opts.observer(0, 0.0, cell.floes());
  for (long long k = 1; k <= steps; ++k) {
    const StepTotals t = opts.parallel ? step_dem_parallel(cell, spec.ocean, opts.params, opts.dt, step)
                                       : step_dem(cell, spec.ocean, opts.params, opts.dt, step);
    result.max_abs_omega = std::max(result.max_abs_omega, t.max_abs_omega);
    if (spec.right_wall) apply_right_wall(cell.floes(), spec.domain.x1);
    take(k);
    if (opts.observer) opts.observer(k, static_cast<double>(k) * opts.dt, cell.floes());
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

CellField concentration_field(std::span<const Floe> floes, const CoarseGrid& grid) {
  CellField out{grid, std::vector<double>(static_cast<std::size_t>(grid.size()), 0.0)};
  for (const Floe& f : floes)
    out.values[static_cast<std::size_t>(grid.flat(grid.cell_of_point(f.x, f.y)))] += kPi * f.r * f.r;
  for (double& v : out.values) v /= grid.cell_area();
  return out;
}

CellField mean_velocity_field(std::span<const Floe> floes, const CoarseGrid& grid) {
  CellField out{grid, std::vector<double>(static_cast<std::size_t>(grid.size()), 0.0)};
  std::vector<std::size_t> count(out.values.size(), 0);
  for (const Floe& f : floes) {
    const auto k = static_cast<std::size_t>(grid.flat(grid.cell_of_point(f.x, f.y)));
    out.values[k] += f.vx;
    ++count[k];
  }
  for (std::size_t k = 0; k < count.size(); ++k)
    if (count[k] > 0) out.values[k] /= static_cast<double>(count[k]);
  return out;
}

double l2_error(const CellField& a, const CellField& b) {
  if (!(a.grid == b.grid) || a.values.size() != b.values.size())
    throw ConfigError("l2_error needs two fields on the same grid");
  double s = 0.0;
  for (std::size_t k = 0; k < a.values.size(); ++k) {
    const double d = a.values[k] - b.values[k];
    s += d * d;
  }
  return std::sqrt(s * a.grid.cell_area());
}

double convergence_rate(const std::vector<std::pair<double, double>>& dx_error) {
  if (dx_error.size() < 2) throw ConfigError("a convergence rate needs at least two points");
  double sx = 0.0, sy = 0.0;
  for (const auto& [dx, e] : dx_error) {
    if (!(dx > 0.0) || !(e > 0.0))
      throw ConfigError(fmt::format("cannot fit a rate through dX = {}, error = {}", dx, e));
    sx += std::log(dx);
    sy += std::log(e);
  }
  const double n = static_cast<double>(dx_error.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [dx, e] : dx_error) {
    sxx += (std::log(dx) - mx) * (std::log(dx) - mx);
    sxy += (std::log(dx) - mx) * (std::log(e) - my);
  }
  if (sxx == 0.0) throw ConfigError("a convergence rate needs at least two distinct dX");
  return sxy / sxx;
}

void check_grid_fits(const ScenarioSpec& spec, int nx, int ny) {
  if (nx < 1 || ny < 1) throw ConfigError(fmt::format("grid {}x{} must have positive sizes", nx, ny));
  if (spec.nx_f % nx != 0 || spec.ny_f % ny != 0)
    throw ConfigError(fmt::format("grid {}x{} does not divide the {}x{} floe lattice", nx, ny,
                                  spec.nx_f, spec.ny_f));
}

MsdemConfig make_msdem_config(const ScenarioSpec& spec, int nx, int ny, double T,
                              const StudySettings& settings, std::vector<double> snapshot_times) {
  check_grid_fits(spec, nx, ny);
  MsdemConfig cfg;
  cfg.grid = CoarseGrid(spec.domain, nx, ny);
  cfg.params = settings.params;
  cfg.schedule = CouplingSchedule::make(settings.dt, settings.dT, settings.n_t, settings.N1, T);
  cfg.step = settings.step;
  cfg.lf.bc = spec.continuum_bc;
  cfg.lf.conc_max = settings.conc_max;
  cfg.wall_column = spec.right_wall;
  cfg.r_min = settings.r_min;
  cfg.snapshot_times = std::move(snapshot_times);
  return cfg;
}

StudyResult convergence_study(const ScenarioSpec& spec, const std::vector<std::pair<int, int>>& grids,
                              const std::vector<double>& times, const StudySettings& settings,
                              const FullDemResult& truth) {
  if (grids.size() < 2) throw ConfigError("a convergence study needs at least two grids");
  if (times.empty()) throw ConfigError("a convergence study needs at least one time");
  const double T = *std::max_element(times.begin(), times.end());
  auto truth_at = [&](double t) -> const FullDemSnapshot& {
    for (const auto& s : truth.snapshots)
      if (std::abs(s.time - t) <= 1e-9 * std::max(1.0, t)) return s;
    throw ConfigError(fmt::format("truth has no snapshot at T = {}", t));
  };
  for (double t : times) truth_at(t);

  StudyResult out;
  const std::vector<Floe> floes = initial_floes(spec);
  for (const auto& [nx, ny] : grids) {
    const MsdemConfig cfg = make_msdem_config(spec, nx, ny, T, settings, times);
    MsdemResult run = run_msdem(floes, spec.ocean, cfg);
    for (double t : times) {
      const auto it = std::find_if(run.snapshots.begin(), run.snapshots.end(), [&](const MsdemSnapshot& s) {
        return std::abs(s.time - t) <= 1e-9 * std::max(1.0, t);
      });
      const CellField ref = concentration_field(truth_at(t).floes, cfg.grid);
      out.rows.push_back({t, nx, ny, cfg.grid.dX(), l2_error(it->conc, ref)});
    }
    out.runs.push_back(std::move(run));
  }
  for (double t : times) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : out.rows)
      if (r.T == t) pts.emplace_back(r.dX, r.l2_error);
    const bool fittable = std::all_of(pts.begin(), pts.end(), [](const auto& p) { return p.second > 0.0; });
    if (!fittable) {
      spdlog::warn("T = {}: zero error on some grid, no convergence rate fitted", t);
      continue;
    }
    out.slopes.emplace_back(t, convergence_rate(pts));
  }
  return out;
}

} // namespace msdem
