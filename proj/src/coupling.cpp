#include "msdem/coupling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

namespace msdem {

// ---------------------------------------------------------------------------
// Schedule

CouplingSchedule CouplingSchedule::make(double dt, double dT, int n_t, int N1, double T) {
  if (!(dt > 0.0) || !(dT > 0.0)) throw ConfigError("dt and dT must be positive");
  if (!(T >= 0.0)) throw ConfigError("final time must be non-negative");
  CouplingSchedule s;
  s.dt = dt;
  s.dT = dT;
  s.n_t = n_t;
  s.N1 = N1;
  s.N0 = static_cast<int>(std::llround(dT / dt));
  s.Nt = std::llround(T / dt);
  if (std::abs(static_cast<double>(s.Nt) * dt - T) > 1e-9 * std::max(1.0, T))
    throw ConfigError(fmt::format("final time {} is not a whole number of fine steps {}", T, dt));
  s.validate();
  return s;
}

void CouplingSchedule::validate() const {
  if (N0 < 1 || std::abs(N0 * dt - dT) > 1e-9 * dT)
    throw ConfigError(fmt::format("dT = {} is not an integer multiple of dt = {}", dT, dt));
  if (n_t < 1 || N0 % n_t != 0)
    throw ConfigError(fmt::format("n_t = {} must divide N0 = {}", n_t, N0));
  if (N1 < 1) throw ConfigError(fmt::format("N1 must be >= 1, got {}", N1));
  if (Nt < 0 || Nt % N0 != 0)
    throw ConfigError(fmt::format("total fine steps {} is not a multiple of N0 = {}", Nt, N0));
}

// ---------------------------------------------------------------------------
// Statistics

void StatsAccumulator::add(const StepTotals& t) {
  sum_v_ = sum_v_ + t.sum_velocity;
  sum_w_ += t.sum_omega;
  sum_drag_ = sum_drag_ + t.drag_force;
  sum_drag_w_ += t.drag_torque;
  ++steps_;
}

CellStats StatsAccumulator::finish(const DemCell& cell, const PhysParams& params) const {
  if (cell.size() == 0) throw ConfigError("cannot take statistics of an empty cell");
  if (steps_ == 0) throw ConfigError("statistics window is empty");
  const double area = cell.subdomain().area();
  const auto samples = cell.size() * static_cast<std::size_t>(steps_);
  CellStats s;
  s.samples = samples;
  s.mean_v = sum_v_ * (1.0 / static_cast<double>(samples));
  s.mean_w = sum_w_ / static_cast<double>(samples);
  s.drag_src = sum_drag_ * (1.0 / (steps_ * area));
  s.drag_src_w = sum_drag_w_ / (steps_ * area);
  s.conc = cell.concentration();
  Vec2 p;
  double pw = 0.0;
  for (const Floe& f : cell.floes()) {
    p = p + f.vel() * floe_mass(f, params);
    pw += floe_inertia(f, params) * f.omega;
  }
  s.momentum_density = p * (1.0 / area);
  s.ang_momentum_density = pw / area;
  return s;
}

CellStats accumulate_stats(const DemCell& cell, std::span<const StepTotals> window,
                           const PhysParams& params) {
  StatsAccumulator acc;
  for (const auto& t : window) acc.add(t);
  return acc.finish(cell, params);
}

// ---------------------------------------------------------------------------
// Gradual updates

double target_mean_radius(double conc_target, const DemCell& cell) {
  if (!(conc_target >= 0.0)) throw ConfigError("target concentration must be non-negative");
  const double current = cell.concentration();
  if (!(current > 0.0) || cell.size() == 0)
    throw DegenerateCellError("cell has zero concentration; cannot rescale radii");
  double sum_r = 0.0;
  for (const Floe& f : cell.floes()) sum_r += f.r;
  const double mean_r0 = sum_r / static_cast<double>(cell.size());
  return std::sqrt(conc_target / current) * mean_r0;
}

namespace {

double planned_radius(const WindowPlan& plan, std::size_t l, double n, int j) {
  const double frac = static_cast<double>(j) / plan.updates;
  return plan.r0[l] + n * (plan.mean_r_target - plan.mean_r0) * (plan.r0[l] / plan.sum_r0) * frac;
}

} // namespace

WindowPlan plan_window(const DemCell& cell, const CellTargets& targets, const PhysParams& params,
                       int updates, double r_min) {
  if (updates < 1) throw ConfigError("a window needs at least one gradual update");
  WindowPlan plan;
  plan.updates = updates;
  plan.r_min = r_min;
  const std::size_t n = cell.size();
  plan.r0.reserve(n);
  for (const Floe& f : cell.floes()) {
    plan.r0.push_back(f.r);
    plan.sum_r0 += f.r;
  }
  plan.mean_r0 = plan.sum_r0 / static_cast<double>(n);
  plan.mean_r_target = target_mean_radius(targets.conc, cell);

  // Masses and inertias after the last radius update of the window.
  const double dn = static_cast<double>(n);
  double mass = 0.0, inertia = 0.0;
  Vec2 p0;
  double pw0 = 0.0;
  const auto floes = cell.floes();
  for (std::size_t l = 0; l < n; ++l) {
    const double r = std::max(planned_radius(plan, l, dn, updates), r_min);
    const double m = floe_mass(r, params);
    const double I = floe_inertia(r, params);
    mass += m;
    inertia += I;
    p0 = p0 + floes[l].vel() * m;
    pw0 += I * floes[l].omega;
  }
  const double area = cell.subdomain().area();
  // n (P - P0) / sum(m) with P, P0 the per-floe means: totals cancel the n.
  plan.dv = (targets.momentum_density * area - p0) * (1.0 / mass);
  plan.dw = (targets.ang_momentum_density * area - pw0) / inertia;
  return plan;
}

void gradual_update_radii(DemCell& cell, const WindowPlan& plan, int j) {
  if (j < 1 || j > plan.updates)
    throw ConfigError(fmt::format("gradual update index {} outside 1..{}", j, plan.updates));
  auto floes = cell.floes();
  const double n = static_cast<double>(floes.size());
  std::size_t clamped = 0;
  for (std::size_t l = 0; l < floes.size(); ++l) {
    double r = planned_radius(plan, l, n, j);
    if (!(r > 0.0)) {
      r = plan.r_min;
      ++clamped;
    }
    floes[l].r = r;
  }
  if (clamped > 0) spdlog::warn("{} floe radius update(s) clamped to r_min = {}", clamped, plan.r_min);
}

void gradual_update_momentum(DemCell& cell, const WindowPlan& plan, int j) {
  if (j < 1 || j > plan.updates)
    throw ConfigError(fmt::format("gradual update index {} outside 1..{}", j, plan.updates));
  // Difference of the snapshot-anchored increments at j and j-1.
  const double now = static_cast<double>(j) / plan.updates;
  const double before = static_cast<double>(j - 1) / plan.updates;
  const Vec2 step = plan.dv * now - plan.dv * before;
  for (Floe& f : cell.floes()) {
    f.vx += step.x;
    f.vy += step.y;
  }
}

void gradual_update_angular(DemCell& cell, const WindowPlan& plan, int j) {
  if (j < 1 || j > plan.updates)
    throw ConfigError(fmt::format("gradual update index {} outside 1..{}", j, plan.updates));
  const double now = static_cast<double>(j) / plan.updates;
  const double before = static_cast<double>(j - 1) / plan.updates;
  const double step = plan.dw * now - plan.dw * before;
  for (Floe& f : cell.floes()) f.omega += step;
}

void apply_gradual_update(DemCell& cell, const WindowPlan& plan, int j) {
  gradual_update_radii(cell, plan, j);
  gradual_update_momentum(cell, plan, j);
  gradual_update_angular(cell, plan, j);
}

// ---------------------------------------------------------------------------
// Orchestration

std::vector<DemCell> build_cells(std::span<const Floe> floes, const CoarseGrid& grid) {
  std::vector<std::vector<Floe>> buckets(static_cast<std::size_t>(grid.size()));
  for (const Floe& f : floes) {
    const CellIndex c = grid.cell_of_point(f.x, f.y);
    buckets[static_cast<std::size_t>(grid.flat(c))].push_back(f);
  }
  std::vector<DemCell> cells;
  cells.reserve(buckets.size());
  for (int k = 0; k < grid.size(); ++k) {
    const CellIndex c = grid.unflat(k);
    auto& b = buckets[static_cast<std::size_t>(k)];
    if (b.empty())
      throw ConfigError(fmt::format("coarse cell ({}, {}) contains no floes", c.i, c.j));
    cells.emplace_back(std::move(b), grid.cell_rect(c), Boundary::doubly_periodic());
  }
  return cells;
}

namespace {

[[noreturn]] void rethrow_with_context(std::exception_ptr ep, int coarse_step, CellIndex c,
                                       int flat) {
  const std::string ctx = fmt::format("coarse step {}, cell ({}, {}): ", coarse_step, c.i, c.j);
  try {
    std::rethrow_exception(ep);
  } catch (const DivergenceError& e) {
    throw DivergenceError(ctx + e.what(), static_cast<std::size_t>(flat));
  } catch (const DegenerateContactError& e) {
    throw DegenerateContactError(ctx + e.what());
  } catch (const DegenerateCellError& e) {
    throw DegenerateCellError(ctx + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + e.what());
  } catch (const Error& e) {
    throw Error(ctx + e.what());
  }
}

double cell_max_abs_omega(const DemCell& cell) {
  double m = 0.0;
  for (const Floe& f : cell.floes()) m = std::max(m, std::abs(f.omega));
  return m;
}

WindowSummary window_for_cell(DemCell& cell, StatsAccumulator& acc, const WindowPlan* plan,
                              const OceanField& ocean, const MsdemConfig& cfg) {
  const auto& sch = cfg.schedule;
  WindowSummary sum;
  acc.reset();
  for (int s = 1; s <= sch.N0; ++s) {
    const StepTotals t = step_dem(cell, ocean, cfg.params, sch.dt, cfg.step);
    acc.add(t);
    sum.max_abs_omega = std::max(sum.max_abs_omega, t.max_abs_omega);
    sum.contacts += t.contacts;
    if (plan != nullptr && s % sch.n_t == 0) {
      apply_gradual_update(cell, *plan, s / sch.n_t);
      sum.max_abs_omega = std::max(sum.max_abs_omega, cell_max_abs_omega(cell));
    }
  }
  return sum;
}

std::vector<WindowSummary> run_window_impl(std::vector<DemCell>& cells,
                                           std::vector<StatsAccumulator>& acc,
                                           const std::vector<WindowPlan>* plans,
                                           const OceanField& ocean, const MsdemConfig& cfg,
                                           int coarse_step, bool parallel) {
  const auto n = static_cast<long long>(cells.size());
  acc.resize(cells.size());
  std::vector<WindowSummary> out(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
  for (long long k = 0; k < n; ++k) {
    const auto u = static_cast<std::size_t>(k);
    try {
      out[u] = window_for_cell(cells[u], acc[u], plans ? &(*plans)[u] : nullptr, ocean, cfg);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (std::size_t k = 0; k < errors.size(); ++k)
    if (errors[k])
      rethrow_with_context(errors[k], coarse_step, cfg.grid.unflat(static_cast<int>(k)),
                           static_cast<int>(k));
  return out;
}

bool is_snapshot_time(const std::vector<double>& times, double t, double dT) {
  return std::any_of(times.begin(), times.end(),
                     [&](double s) { return std::abs(s - t) <= 1e-9 * dT; });
}

MsdemSnapshot snapshot_of(const std::vector<DemCell>& cells, const CoarseGrid& grid, double t) {
  MsdemSnapshot snap;
  snap.time = t;
  snap.conc.grid = grid;
  snap.mean_vx.grid = grid;
  for (const DemCell& c : cells) {
    snap.conc.values.push_back(c.concentration());
    double vx = 0.0;
    for (const Floe& f : c.floes()) vx += f.vx;
    snap.mean_vx.values.push_back(vx / static_cast<double>(c.size()));
  }
  return snap;
}

void load_coefficients(ContinuumState& s, const std::vector<CellStats>& stats, const MsdemConfig& cfg) {
  const int nx = cfg.grid.nx();
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const bool wall = cfg.wall_column && static_cast<int>(k) % nx == nx - 1;
    s.vbar_x[k] = wall ? 0.0 : stats[k].mean_v.x;
    s.vbar_y[k] = wall ? 0.0 : stats[k].mean_v.y;
    s.src_x[k] = stats[k].drag_src.x;
    s.src_y[k] = stats[k].drag_src.y;
    s.src_w[k] = stats[k].drag_src_w;
  }
}

} // namespace

std::vector<WindowSummary> run_window(std::vector<DemCell>& cells, std::vector<StatsAccumulator>& acc,
                                      const std::vector<WindowPlan>* plans, const OceanField& ocean,
                                      const MsdemConfig& cfg, int coarse_step) {
  return run_window_impl(cells, acc, plans, ocean, cfg, coarse_step, true);
}

std::vector<WindowSummary> run_window_serial(std::vector<DemCell>& cells,
                                             std::vector<StatsAccumulator>& acc,
                                             const std::vector<WindowPlan>* plans,
                                             const OceanField& ocean, const MsdemConfig& cfg,
                                             int coarse_step) {
  return run_window_impl(cells, acc, plans, ocean, cfg, coarse_step, false);
}

MsdemResult run_msdem(std::span<const Floe> floes, const OceanField& ocean, const MsdemConfig& cfg,
                      const MsdemObserver& observer) {
  const auto t_start = std::chrono::steady_clock::now();
  cfg.params.validate();
  cfg.schedule.validate();
  const auto& sch = cfg.schedule;
  for (double t : cfg.snapshot_times) {
    const double k = t / sch.dT;
    if (t < 0.0 || std::abs(k - std::round(k)) > 1e-9 || std::llround(k) > sch.coarse_steps())
      throw ConfigError(fmt::format("snapshot time {} is not a coarse step within the run", t));
  }

  MsdemResult result;
  std::vector<DemCell> cells = build_cells(floes, cfg.grid);
  const std::size_t ncell = cells.size();
  std::vector<StatsAccumulator> acc(ncell);
  std::vector<CellStats> stats(ncell);

  if (is_snapshot_time(cfg.snapshot_times, 0.0, sch.dT))
    result.snapshots.push_back(snapshot_of(cells, cfg.grid, 0.0));
  if (observer) observer(0, 0.0, cells, nullptr);
  for (const DemCell& c : cells) result.max_abs_omega = std::max(result.max_abs_omega, cell_max_abs_omega(c));

  const int steps = sch.coarse_steps();
  if (steps == 0) {
    result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
  }

  auto record = [&](int k, const std::vector<WindowSummary>& summary, const ContinuumState& cont) {
    const double t = k * sch.dT;
    CoarseDiagnostics d;
    d.step = k;
    d.time = t;
    d.total_mass = cont.total_mass();
    d.total_momentum = cont.total_momentum();
    for (const auto& s : summary) {
      result.max_abs_omega = std::max(result.max_abs_omega, s.max_abs_omega);
      d.contacts += s.contacts;
    }
    d.max_abs_omega = result.max_abs_omega;
    result.diagnostics.push_back(d);
    if (is_snapshot_time(cfg.snapshot_times, t, sch.dT))
      result.snapshots.push_back(snapshot_of(cells, cfg.grid, t));
    if (observer) observer(k, t, cells, &cont);
  };

  // Warm-up window, then initialize the continuum from the DEM statistics.
  auto summary = run_window(cells, acc, nullptr, ocean, cfg, 1);
  ContinuumState cont(cfg.grid);
  for (std::size_t k = 0; k < ncell; ++k) {
    stats[k] = acc[k].finish(cells[k], cfg.params);
    cont.conc[k] = stats[k].conc;
    cont.px[k] = stats[k].momentum_density.x;
    cont.py[k] = stats[k].momentum_density.y;
    cont.pw[k] = stats[k].ang_momentum_density;
  }
  load_coefficients(cont, stats, cfg);
  record(1, summary, cont);

  std::vector<WindowPlan> plans(ncell);
  for (int k = 2; k <= steps; ++k) {
    try {
      cont = solve_coarse_step(cont, sch.dT, sch.N1, cfg.lf);
    } catch (const DivergenceError& e) {
      throw DivergenceError(fmt::format("coarse step {}: {}", k, e.what()), e.index());
    } catch (const StabilityError& e) {
      throw StabilityError(fmt::format("coarse step {}: {}", k, e.what()));
    }
    for (std::size_t c = 0; c < ncell; ++c) {
      const CellTargets targets{cont.conc[c], {cont.px[c], cont.py[c]}, cont.pw[c]};
      try {
        plans[c] = plan_window(cells[c], targets, cfg.params, sch.updates_per_window(), cfg.r_min);
      } catch (...) {
        rethrow_with_context(std::current_exception(), k, cfg.grid.unflat(static_cast<int>(c)),
                             static_cast<int>(c));
      }
    }
    summary = run_window(cells, acc, &plans, ocean, cfg, k);
    for (std::size_t c = 0; c < ncell; ++c) stats[c] = acc[c].finish(cells[c], cfg.params);
    load_coefficients(cont, stats, cfg);
    record(k, summary, cont);
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return result;
}

} // namespace msdem
