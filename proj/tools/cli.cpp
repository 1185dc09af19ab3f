#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "msdem/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace msdem::cli {

std::pair<int, int> parse_grid(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(s);
    std::size_t a = 0, b = 0;
    const int nx = std::stoi(s.substr(0, x), &a);
    const int ny = std::stoi(s.substr(x + 1), &b);
    if (a != x || b != s.size() - x - 1 || nx < 1 || ny < 1) throw std::invalid_argument(s);
    return {nx, ny};
  } catch (const std::logic_error&) {
    throw ConfigError(fmt::format("bad grid '{}', expected NXxNY such as 48x24", s));
  }
}

void RunConfig::validate() const {
  if (scenario.empty()) throw ConfigError("no scenario given (--scenario s41|s42|s43|s44)");
  const ScenarioSpec spec = make_scenario(parse_scenario(scenario), scale);
  if (model != "msdem" && model != "dem")
    throw ConfigError(fmt::format("unknown model '{}' (expected msdem or dem)", model));
  if (truth_model != "msdem" && truth_model != "dem")
    throw ConfigError(fmt::format("unknown truth model '{}' (expected dem or msdem)", truth_model));
  params.validate();
  for (const auto& [gx, gy] : grids) check_grid_fits(spec, gx, gy);
  CouplingSchedule::make(dt, dT, n_t, N1, T);
  for (double t : snapshot_times()) {
    const double k = t / dT;
    if (t < 0.0 || t > T * (1.0 + 1e-12) || std::abs(k - std::round(k)) > 1e-9)
      throw ConfigError(fmt::format("snapshot time {} must be a multiple of dT within [0, T]", t));
  }
  if (!(conc_max > 0.0)) throw ConfigError("conc_max must be positive");
  if (!(r_min > 0.0)) throw ConfigError("r_min must be positive");
  if (workers < 0) throw ConfigError("workers must be >= 0");
}

std::vector<double> RunConfig::snapshot_times() const {
  return times.empty() ? std::vector<double>{T} : times;
}

StudySettings RunConfig::settings() const {
  StudySettings s;
  s.params = params;
  s.dt = dt;
  s.dT = dT;
  s.n_t = n_t;
  s.N1 = N1;
  s.step.strict_engulfment = strict_engulfment;
  s.conc_max = conc_max;
  s.r_min = r_min;
  return s;
}

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

std::string grid_str(int nx, int ny) { return fmt::format("{}x{}", nx, ny); }

const std::vector<std::string> kKnownKeys = {
    "scenario", "scale",   "model",   "grid",        "dt",          "dT",
    "n_t",      "N1",      "T",       "times",       "rho_ice",     "d_o",
    "rho_o",    "E",       "G",       "mu",          "strict_engulfment",
    "conc_max", "r_min",   "out",     "dump_fields", "dump_floes",  "workers",
    "seed",     "grids",   "truth_model", "cache_dir"};

} // namespace

void apply_json(RunConfig& cfg, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::find(kKnownKeys.begin(), kKnownKeys.end(), k) == kKnownKeys.end())
      throw ConfigError(fmt::format("unknown config key '{}'", k));
  try {
    read_key(j, "scenario", cfg.scenario);
    read_key(j, "scale", cfg.scale);
    read_key(j, "model", cfg.model);
    if (j.contains("grid")) std::tie(cfg.nx, cfg.ny) = parse_grid(j.at("grid").get<std::string>());
    read_key(j, "dt", cfg.dt);
    read_key(j, "dT", cfg.dT);
    read_key(j, "n_t", cfg.n_t);
    read_key(j, "N1", cfg.N1);
    read_key(j, "T", cfg.T);
    read_key(j, "times", cfg.times);
    read_key(j, "rho_ice", cfg.params.rho_ice);
    read_key(j, "d_o", cfg.params.d_o);
    read_key(j, "rho_o", cfg.params.rho_o);
    read_key(j, "E", cfg.params.E);
    read_key(j, "G", cfg.params.G);
    read_key(j, "mu", cfg.params.mu);
    read_key(j, "strict_engulfment", cfg.strict_engulfment);
    read_key(j, "conc_max", cfg.conc_max);
    read_key(j, "r_min", cfg.r_min);
    read_key(j, "out", cfg.out);
    read_key(j, "dump_fields", cfg.dump_fields);
    read_key(j, "dump_floes", cfg.dump_floes);
    read_key(j, "workers", cfg.workers);
    read_key(j, "seed", cfg.seed);
    if (j.contains("grids")) {
      cfg.grids.clear();
      for (const auto& g : j.at("grids")) cfg.grids.push_back(parse_grid(g.get<std::string>()));
    }
    read_key(j, "truth_model", cfg.truth_model);
    read_key(j, "cache_dir", cfg.cache_dir);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad config value: {}", e.what()));
  }
}

json to_json(const RunConfig& c) {
  json grids = json::array();
  for (const auto& [gx, gy] : c.grids) grids.push_back(grid_str(gx, gy));
  return {{"scenario", c.scenario},
          {"scale", c.scale},
          {"model", c.model},
          {"grid", grid_str(c.nx, c.ny)},
          {"dt", c.dt},
          {"dT", c.dT},
          {"n_t", c.n_t},
          {"N1", c.N1},
          {"T", c.T},
          {"times", c.snapshot_times()},
          {"rho_ice", c.params.rho_ice},
          {"d_o", c.params.d_o},
          {"rho_o", c.params.rho_o},
          {"E", c.params.E},
          {"G", c.params.G},
          {"mu", c.params.mu},
          {"strict_engulfment", c.strict_engulfment},
          {"conc_max", c.conc_max},
          {"r_min", c.r_min},
          {"out", c.out},
          {"dump_fields", c.dump_fields},
          {"dump_floes", c.dump_floes},
          {"workers", c.workers},
          {"seed", c.seed},
          {"grids", grids},
          {"truth_model", c.truth_model},
          {"cache_dir", c.cache_dir}};
}

std::string truth_key(const RunConfig& c, double T_max, const std::vector<double>& times) {
  std::string s = fmt::format("truth-v1|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}", c.scenario, c.scale, c.dt,
                              c.params.rho_ice, c.params.d_o, c.params.rho_o, c.params.E, c.params.G,
                              c.params.mu, c.strict_engulfment, T_max);
  for (double t : times) s += fmt::format("|{}", t);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

namespace {

constexpr char kCacheMagic[8] = {'M', 'S', 'D', 'T', 'R', 'U', 'T', '1'};

bool load_truth(const fs::path& p, FullDemResult& out) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  char magic[8];
  std::uint64_t n_snap = 0;
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kCacheMagic)) return false;
  in.read(reinterpret_cast<char*>(&n_snap), sizeof n_snap);
  FullDemResult r;
  in.read(reinterpret_cast<char*>(&r.max_abs_omega), sizeof(double));
  for (std::uint64_t s = 0; s < n_snap && in; ++s) {
    FullDemSnapshot snap;
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&snap.time), sizeof(double));
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || n > (1ULL << 32)) return false;
    snap.floes.resize(n);
    in.read(reinterpret_cast<char*>(snap.floes.data()), static_cast<std::streamsize>(n * sizeof(Floe)));
    r.snapshots.push_back(std::move(snap));
  }
  if (!in) return false;
  out = std::move(r);
  return true;
}

void store_truth(const fs::path& p, const FullDemResult& r) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    const std::uint64_t n_snap = r.snapshots.size();
    os.write(kCacheMagic, 8);
    os.write(reinterpret_cast<const char*>(&n_snap), sizeof n_snap);
    os.write(reinterpret_cast<const char*>(&r.max_abs_omega), sizeof(double));
    for (const auto& s : r.snapshots) {
      const std::uint64_t n = s.floes.size();
      os.write(reinterpret_cast<const char*>(&s.time), sizeof(double));
      os.write(reinterpret_cast<const char*>(&n), sizeof n);
      os.write(reinterpret_cast<const char*>(s.floes.data()), static_cast<std::streamsize>(n * sizeof(Floe)));
    }
    if (!os) throw Error(fmt::format("cannot write truth cache {}", tmp.string()));
  }
  fs::rename(tmp, p);
}

} // namespace

FullDemResult cached_truth(const RunConfig& cfg, const ScenarioSpec& spec, double T_max,
                           const std::vector<double>& times, bool& hit) {
  const fs::path p = fs::path(cfg.cache_dir) / fmt::format("truth_{}.bin", truth_key(cfg, T_max, times));
  FullDemResult r;
  hit = load_truth(p, r);
  if (hit) {
    spdlog::info("truth loaded from {}", p.string());
    return r;
  }
  FullDemOptions o;
  o.params = cfg.params;
  o.dt = cfg.dt;
  o.step.strict_engulfment = cfg.strict_engulfment;
  o.snapshot_times = times;
  r = run_full_dem(spec, T_max, o);
  store_truth(p, r);
  spdlog::info("truth computed in {:.1f} s, cached at {}", r.wall_seconds, p.string());
  return r;
}

namespace {

void apply_workers(const RunConfig& cfg) {
  const int n = cfg.workers > 0 ? cfg.workers : workers_from_env();
  if (n > 0) set_worker_count(n);
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os << s;
  if (!os) throw Error(fmt::format("cannot write {}", p.string()));
}

std::string snapshot_csv(const CellField& conc, const CellField& vx) {
  const CoarseGrid& g = conc.grid;
  std::string s = "i,j,x,y,conc,mean_vx\n";
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const Vec2 c = g.cell_center({i, j});
      s += fmt::format("{},{},{},{},{},{}\n", i, j, c.x, c.y, conc.at({i, j}), vx.at({i, j}));
    }
  return s;
}

std::string fields_csv(const ContinuumState& st) {
  const CoarseGrid& g = st.grid;
  std::string s = "i,j,conc,px,py,pw\n";
  for (int k = 0; k < g.size(); ++k) {
    const CellIndex c = g.unflat(k);
    const auto u = static_cast<std::size_t>(k);
    s += fmt::format("{},{},{},{},{},{}\n", c.i, c.j, st.conc[u], st.px[u], st.py[u], st.pw[u]);
  }
  return s;
}

std::string floes_csv(std::span<const Floe> floes) {
  std::ostringstream os;
  write_floes_csv(os, floes);
  return os.str();
}

std::string snapshot_name(double t) { return fmt::format("conc_t{:.4f}.csv", t); }

json spec_json(const ScenarioSpec& s) {
  return {{"id", to_string(s.id)},
          {"scale", s.scale},
          {"domain", {s.domain.x0, s.domain.x1, s.domain.y0, s.domain.y1}},
          {"lattice", grid_str(s.nx_f, s.ny_f)},
          {"floes", s.nx_f * s.ny_f},
          {"r_c", s.r_c},
          {"periodic_x", s.boundary.periodic_x},
          {"periodic_y", s.boundary.periodic_y},
          {"right_wall", s.right_wall},
          {"continuum_bc", s.continuum_bc == ContinuumBc::WallX ? "wall_x" : "periodic"}};
}

json diagnostics_json(const std::vector<CoarseDiagnostics>& diags) {
  json a = json::array();
  for (const auto& d : diags)
    a.push_back({{"step", d.step},
                 {"time", d.time},
                 {"total_mass", d.total_mass},
                 {"total_momentum", {d.total_momentum.x, d.total_momentum.y}},
                 {"max_abs_omega", d.max_abs_omega},
                 {"contacts", d.contacts}});
  return a;
}

} // namespace

int cmd_run(const RunConfig& cfg) {
  cfg.validate();
  apply_workers(cfg);
  const ScenarioSpec spec = make_scenario(parse_scenario(cfg.scenario), cfg.scale);
  check_grid_fits(spec, cfg.nx, cfg.ny);
  const fs::path out(cfg.out);
  fs::create_directories(out);
  const CoarseGrid grid(spec.domain, cfg.nx, cfg.ny);
  const auto times = cfg.snapshot_times();
  const std::string started = utc_now();
  json manifest = {{"command", "run"}, {"config", to_json(cfg)}, {"scenario", spec_json(spec)}};
  json outputs = json::array();

  if (cfg.model == "msdem") {
    MsdemConfig mc = make_msdem_config(spec, cfg.nx, cfg.ny, cfg.T, cfg.settings(), times);
    MsdemObserver obs;
    if (cfg.dump_fields || cfg.dump_floes) {
      obs = [&](int step, double, std::span<const DemCell> cells, const ContinuumState* cont) {
        if (cfg.dump_fields && cont) {
          const auto name = fmt::format("fields/step_{:05}.csv", step);
          write_text(out / name, fields_csv(*cont));
          outputs.push_back(name);
        }
        if (cfg.dump_floes)
          for (std::size_t k = 0; k < cells.size(); ++k) {
            const auto name = fmt::format("floes/step_{:05}/cell_{:05}.csv", step, k);
            write_text(out / name, floes_csv(cells[k].floes()));
            outputs.push_back(name);
          }
      };
    }
    const MsdemResult r = run_msdem(initial_floes(spec), spec.ocean, mc, obs);
    for (const auto& s : r.snapshots) {
      write_text(out / snapshot_name(s.time), snapshot_csv(s.conc, s.mean_vx));
      outputs.push_back(snapshot_name(s.time));
    }
    manifest["max_abs_omega"] = r.max_abs_omega;
    manifest["diagnostics"] = diagnostics_json(r.diagnostics);
    manifest["timing"] = {{"started_at", started}, {"wall_seconds", r.wall_seconds}, {"workers", worker_count()}};
  } else {
    FullDemOptions o;
    o.params = cfg.params;
    o.dt = cfg.dt;
    o.step.strict_engulfment = cfg.strict_engulfment;
    o.snapshot_times = times;
    const long long N0 = std::llround(cfg.dT / cfg.dt);
    if (cfg.dump_floes)
      o.observer = [&](long long step, double, std::span<const Floe> floes) {
        if (step % N0 != 0) return;
        const auto name = fmt::format("floes/step_{:05}.csv", step / N0);
        write_text(out / name, floes_csv(floes));
        outputs.push_back(name);
      };
    const FullDemResult r = run_full_dem(spec, cfg.T, o);
    for (const auto& s : r.snapshots) {
      write_text(out / snapshot_name(s.time),
                 snapshot_csv(concentration_field(s.floes, grid), mean_velocity_field(s.floes, grid)));
      outputs.push_back(snapshot_name(s.time));
    }
    manifest["max_abs_omega"] = r.max_abs_omega;
    manifest["timing"] = {{"started_at", started}, {"wall_seconds", r.wall_seconds}, {"workers", worker_count()}};
  }
  manifest["outputs"] = outputs;
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  spdlog::info("wrote {} file(s) to {}", outputs.size() + 1, out.string());
  return kOk;
}

int cmd_convergence(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.grids.size() < 2) throw ConfigError("convergence needs at least two grids (--grids 12x6,24x12,48x24)");
  apply_workers(cfg);
  const ScenarioSpec spec = make_scenario(parse_scenario(cfg.scenario), cfg.scale);
  const fs::path out(cfg.out);
  fs::create_directories(out);
  const auto times = cfg.snapshot_times();
  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();

  StudyResult study;
  json truth_info;
  if (cfg.truth_model == "dem") {
    bool hit = false;
    const FullDemResult truth = cached_truth(cfg, spec, cfg.T, times, hit);
    study = convergence_study(spec, cfg.grids, times, cfg.settings(), truth);
    truth_info = {{"model", "dem"}, {"cache_key", truth_key(cfg, cfg.T, times)}, {"cache_hit", hit}};
  } else {
    // msDEM against itself: every error is zero and no rate can be fitted.
    const auto floes = initial_floes(spec);
    for (const auto& [nx, ny] : cfg.grids) {
      const MsdemConfig mc = make_msdem_config(spec, nx, ny, cfg.T, cfg.settings(), times);
      const MsdemResult a = run_msdem(floes, spec.ocean, mc);
      for (std::size_t k = 0; k < a.snapshots.size(); ++k)
        study.rows.push_back({a.snapshots[k].time, nx, ny, mc.grid.dX(),
                              l2_error(a.snapshots[k].conc, a.snapshots[k].conc)});
    }
    spdlog::warn("truth model is msdem itself: all errors are zero, no convergence rate fitted");
    truth_info = {{"model", "msdem"}};
  }

  std::string csv = "scenario,T,dX,l2_error\n";
  json rows = json::array();
  for (const auto& r : study.rows) {
    csv += fmt::format("{},{},{},{}\n", cfg.scenario, r.T, r.dX, r.l2_error);
    rows.push_back({{"T", r.T}, {"grid", grid_str(r.nx, r.ny)}, {"dX", r.dX}, {"l2_error", r.l2_error}});
  }
  json slopes = json::array();
  for (double t : times) {
    json entry = {{"T", t}, {"slope", nullptr}};
    for (const auto& [st, slope] : study.slopes)
      if (st == t) entry["slope"] = slope;
    slopes.push_back(entry);
  }
  write_text(out / "convergence.csv", csv);
  const json summary = {{"scenario", cfg.scenario}, {"scale", cfg.scale}, {"rows", rows},
                        {"slopes", slopes}, {"truth", truth_info}};
  write_text(out / "convergence.json", summary.dump(2) + "\n");
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"command", "convergence"},
                   {"config", to_json(cfg)},
                   {"scenario", spec_json(spec)},
                   {"outputs", {"convergence.csv", "convergence.json"}},
                   {"timing", {{"started_at", started}, {"wall_seconds", wall}, {"workers", worker_count()}}}};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  for (const auto& s : slopes)
    fmt::print("{} T={} slope={}\n", cfg.scenario, s["T"].get<double>(),
               s["slope"].is_null() ? std::string("n/a") : fmt::format("{:.4f}", s["slope"].get<double>()));
  return kOk;
}

int cmd_validate(const RunConfig& cfg) {
  cfg.validate();
  std::cout << to_json(cfg).dump(2) << "\n";
  return kOk;
}

int cmd_dump_scenario(const RunConfig& cfg) {
  if (cfg.scenario.empty()) throw ConfigError("no scenario given (--scenario s41|s42|s43|s44)");
  const ScenarioSpec spec = make_scenario(parse_scenario(cfg.scenario), cfg.scale);
  const auto floes = initial_floes(spec);
  const fs::path out(cfg.out);
  write_text(out / "initial_floes.csv", floes_csv(floes));
  json j = spec_json(spec);
  double area = 0.0;
  for (const Floe& f : floes) area += std::numbers::pi * f.r * f.r;
  j["total_floe_area"] = area;
  write_text(out / "scenario.json", j.dump(2) + "\n");
  std::cout << j.dump(2) << "\n";
  return kOk;
}

namespace {

// Flag values land in a JSON object so they can be laid over the config file.
struct Overrides {
  std::vector<std::function<void(json&)>> setters;

  template <class T>
  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(flag, *value, help);
    setters.push_back([opt, value, key](json& j) {
      if (opt->count() > 0) j[key] = *value;
    });
  }
  void add_flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *value, help);
    setters.push_back([opt, value, key](json& j) {
      if (opt->count() > 0) j[key] = *value;
    });
  }
  json collect() const {
    json j = json::object();
    for (const auto& s : setters) s(j);
    return j;
  }
};

void add_common(CLI::App* app, Overrides& ov, std::string& config_path) {
  app->add_option("--config", config_path, "JSON config file; flags override its values");
  ov.add<std::string>(app, "--scenario", "scenario", "s41, s42, s43 or s44");
  ov.add<double>(app, "--scale", "scale", "floe lattice scale (1 gives 480x240)");
  ov.add<std::string>(app, "--model", "model", "msdem or dem");
  ov.add<std::string>(app, "--grid", "grid", "coarse grid NXxNY");
  ov.add<double>(app, "--dt", "dt", "fine step");
  ov.add<double>(app, "--dT", "dT", "coarse step");
  ov.add<int>(app, "--n-t", "n_t", "fine steps between gradual updates");
  ov.add<int>(app, "--N1", "N1", "continuum substeps per coarse step");
  ov.add<double>(app, "--T", "T", "final time");
  ov.add<double>(app, "--rho-ice", "rho_ice", "ice density");
  ov.add<double>(app, "--d-o", "d_o", "ocean drag coefficient");
  ov.add<double>(app, "--rho-o", "rho_o", "ocean density");
  ov.add<double>(app, "--E", "E", "normal contact modulus");
  ov.add<double>(app, "--G", "G", "tangential contact modulus");
  ov.add<double>(app, "--mu", "mu", "friction coefficient");
  ov.add<double>(app, "--conc-max", "conc_max", "concentration clamp");
  ov.add<double>(app, "--r-min", "r_min", "radius floor for gradual updates");
  ov.add<std::string>(app, "--out", "out", "output directory");
  ov.add<int>(app, "--workers", "workers", "OpenMP workers (falls back to MSDEM_WORKERS)");
  ov.add<unsigned>(app, "--seed", "seed", "reserved");
  ov.add<std::string>(app, "--cache-dir", "cache_dir", "truth cache directory");
  ov.add<std::string>(app, "--truth-model", "truth_model", "dem or msdem");
  ov.add_flag(app, "--dump-fields", "dump_fields", "write continuum fields every coarse step");
  ov.add_flag(app, "--dump-floes", "dump_floes", "write floe states every coarse step");
  ov.add_flag(app, "--permissive-engulfment", "strict_engulfment", "");
  auto times = std::make_shared<std::vector<double>>();
  auto* t_opt = app->add_option("--times", *times, "snapshot times, comma separated")->delimiter(',');
  ov.setters.push_back([t_opt, times](json& j) {
    if (t_opt->count() > 0) j["times"] = *times;
  });
  auto grids = std::make_shared<std::vector<std::string>>();
  auto* g_opt = app->add_option("--grids", *grids, "grids for convergence, comma separated")->delimiter(',');
  ov.setters.push_back([g_opt, grids](json& j) {
    if (g_opt->count() > 0) j["grids"] = *grids;
  });
}

RunConfig load_config(const std::string& path, const Overrides& ov) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot open config file {}", path));
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError(fmt::format("{}: {}", path, e.what()));
    }
    apply_json(cfg, j);
  }
  json flags = ov.collect();
  // The flag is phrased as the negation of the config key.
  if (flags.contains("strict_engulfment")) flags["strict_engulfment"] = !flags["strict_engulfment"].get<bool>();
  apply_json(cfg, flags);
  return cfg;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale sea-ice floe model"};
  app.require_subcommand(1);
  std::map<std::string, std::pair<Overrides, std::string>> subs;
  std::map<std::string, std::function<int(const RunConfig&)>> handlers = {
      {"run", cmd_run},
      {"convergence", cmd_convergence},
      {"validate-config", cmd_validate},
      {"dump-scenario", cmd_dump_scenario}};
  const std::map<std::string, std::string> descriptions = {
      {"run", "run one model and write snapshots"},
      {"convergence", "msDEM errors against the full DEM over several grids"},
      {"validate-config", "check a config and print it with defaults filled in"},
      {"dump-scenario", "write the initial floes of a scenario"}};
  std::vector<CLI::App*> apps;
  for (const auto& [name, desc] : descriptions) {
    CLI::App* sub = app.add_subcommand(name, desc);
    auto& [ov, path] = subs[name];
    add_common(sub, ov, path);
    apps.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }
  try {
    for (CLI::App* sub : apps) {
      if (!sub->parsed()) continue;
      const auto& [ov, path] = subs.at(sub->get_name());
      return handlers.at(sub->get_name())(load_config(path, ov));
    }
    return kConfig;
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const DomainError& e) {
    spdlog::error("config error: {}", e.what());
    return kConfig;
  } catch (const DivergenceError& e) {
    spdlog::error("divergence: {}", e.what());
    return kDivergence;
  } catch (const StabilityError& e) {
    spdlog::error("unstable: {}", e.what());
    return kDivergence;
  } catch (const DegenerateContactError& e) {
    spdlog::error("degenerate contact: {}", e.what());
    return kDivergence;
  } catch (const DegenerateCellError& e) {
    spdlog::error("degenerate cell: {}", e.what());
    return kDivergence;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kFailure;
  }
}

} // namespace msdem::cli
