#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "bstar/analysis.hpp"
#include "bstar/dynamics.hpp"
#include "bstar/groundstate.hpp"
#include "bstar/io.hpp"

namespace bstar::cli {

namespace fs = std::filesystem;

enum ExitCode : int { ok = 0, validation_error = 1, numerical_failure = 2, blowup_suspected = 3 };

inline constexpr const char* kOutputEnv = "BSTAR_OUTPUT_DIR";

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"groundstate", "evolve",   "sweep", "stability",
                                          "decay",       "bestconst", "blowup", "green"};
  return c;
}

struct RunConfig {
  std::string command;
  double m = 1.0;
  Vec3 v{};
  double N = 0.5;
  int n = 64;
  double L = 20.0;
  double tol = 1e-8;
  int max_iter = 20000;
  std::string solver = "fixed_point";
  double dt = 5e-3;
  double t_end = 5.0;
  int record_every = 20;
  std::string output;
  int snapshot_every = 0;  ///< records between snapshots; 0 disables
  std::uint64_t seed = 1;
  std::string input;       ///< BSF1 initial field for evolve
  double epsilon = 0.01;   ///< stability perturbation size
  double mu = 1.0;         ///< green
  bool contrast = false;   ///< blowup: also run the 10x charge-reduced datum
  bool bisect = false;     ///< bestconst: also bisect with the ground-state solver
  std::vector<double> sweep_N;
  std::vector<Vec3> sweep_v;
  int jobs = 0;

  GridSpec grid() const { return GridSpec(n, L); }
  PhysicalParams params() const { return {m, v}; }

  /// Checks every module precondition before compute starts.
  void validate() const {
    require(std::find(commands().begin(), commands().end(), command) != commands().end(),
            "unknown command '" + command + "'");
    params().validate();
    (void)grid();
    require(std::isfinite(N) && N > 0.0, "target charge N must be positive");
    require(std::isfinite(tol) && tol > 0.0, "tolerance must be positive");
    require(max_iter > 0, "max_iter must be positive");
    require(solver == "fixed_point" || solver == "gradient_flow", "solver must be fixed_point or gradient_flow");
    require(std::isfinite(dt) && dt > 0.0, "time step must be positive");
    require(std::isfinite(t_end) && t_end >= 0.0, "t_end must be >= 0");
    require(record_every > 0, "record_every must be positive");
    require(snapshot_every >= 0, "snapshot cadence must be >= 0");
    require(jobs >= 0, "jobs must be >= 0");
    if (command != "bestconst") require(m > 0.0, "command '" + command + "' requires m > 0");
    if (command == "stability") require(epsilon >= 0.0 && epsilon <= 0.1, "perturbation size must lie in [0, 0.1]");
    if (command == "green") require(above_spectrum(m, v, mu), "mu lies in the spectrum of H0 (need mu > -Sigma_v)");
    if (command == "sweep") {
      require(!sweep_N.empty(), "sweep needs --sweep-N");
      for (double x : sweep_N) require(std::isfinite(x) && x > 0.0, "sweep charges must be positive");
      for (const auto& w : sweep_v) require_subluminal(w);
    }
  }

  Solver solver_kind() const { return solver == "gradient_flow" ? Solver::gradient_flow : Solver::fixed_point; }
};

inline json to_json(const RunConfig& c) {
  json sv = json::array();
  for (const auto& w : c.sweep_v) sv.push_back(bstar::to_json(w));
  return {{"command", c.command},
          {"m", c.m},
          {"v", bstar::to_json(c.v)},
          {"N", c.N},
          {"n", c.n},
          {"L", c.L},
          {"tol", c.tol},
          {"max_iter", c.max_iter},
          {"solver", c.solver},
          {"dt", c.dt},
          {"t_end", c.t_end},
          {"record_every", c.record_every},
          {"output", c.output},
          {"snapshot_every", c.snapshot_every},
          {"seed", c.seed},
          {"input", c.input},
          {"epsilon", c.epsilon},
          {"mu", c.mu},
          {"contrast", c.contrast},
          {"bisect", c.bisect},
          {"sweep_N", c.sweep_N},
          {"sweep_v", sv},
          {"jobs", c.jobs}};
}

inline RunConfig config_from_json(const json& j) {
  RunConfig c;
  auto vec = [](const json& a) {
    require(a.is_array() && a.size() == 3, "velocity must have three components");
    return Vec3{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  };
  try {
    c.command = j.value("command", c.command);
    c.m = j.value("m", c.m);
    if (j.contains("v")) c.v = vec(j["v"]);
    c.N = j.value("N", c.N);
    c.n = j.value("n", c.n);
    c.L = j.value("L", c.L);
    c.tol = j.value("tol", c.tol);
    c.max_iter = j.value("max_iter", c.max_iter);
    c.solver = j.value("solver", c.solver);
    c.dt = j.value("dt", c.dt);
    c.t_end = j.value("t_end", c.t_end);
    c.record_every = j.value("record_every", c.record_every);
    c.output = j.value("output", c.output);
    c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
    c.seed = j.value("seed", c.seed);
    c.input = j.value("input", c.input);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.mu = j.value("mu", c.mu);
    c.contrast = j.value("contrast", c.contrast);
    c.bisect = j.value("bisect", c.bisect);
    c.sweep_N = j.value("sweep_N", c.sweep_N);
    if (j.contains("sweep_v"))
      for (const auto& w : j["sweep_v"]) c.sweep_v.push_back(vec(w));
    c.jobs = j.value("jobs", c.jobs);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("invalid config: ") + e.what());
  }
  return c;
}

/// "a,b,c" -> Vec3.
inline Vec3 parse_vec3(const std::string& s) {
  std::vector<double> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      require(used == item.size(), "");
    } catch (const std::exception&) {
      throw ValidationError("velocity must be three comma-separated numbers, got '" + s + "'");
    }
  }
  require(parts.size() == 3, "velocity must be three comma-separated numbers, got '" + s + "'");
  return {parts[0], parts[1], parts[2]};
}

inline fs::path default_output(const std::string& command) {
  const char* env = std::getenv(kOutputEnv);
  return fs::path(env && *env ? env : "bstar_out") / command;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct Outcome {
  int code = ExitCode::ok;
  json results = json::object();
  json pass_flags = json::object();
};

namespace detail {

inline GroundStateProblem problem(const RunConfig& c) {
  GroundStateProblem p;
  p.params = c.params();
  p.N = c.N;
  p.grid = c.grid();
  p.solver = c.solver_kind();
  p.tol = c.tol;
  p.max_iter = c.max_iter;
  return p;
}

inline EvolutionConfig evolution(const RunConfig& c) {
  EvolutionConfig e;
  e.dt = c.dt;
  e.t_end = c.t_end;
  e.params = c.params();
  e.record_every = c.record_every;
  return e;
}

inline SnapshotMeta meta_for(const RunConfig& c, const Field& f, std::optional<double> mu) {
  SnapshotMeta m;
  m.m = c.m;
  m.v = c.v;
  m.N = charge(f);
  m.mu = mu;
  m.metadata = {{"command", c.command}, {"seed", c.seed}};
  return m;
}

inline GroundStateResult ground_state(const RunConfig& c, const fs::path& dir) {
  auto p = problem(c);
  std::vector<IterationRecord> its;
  p.on_iteration = [&](const IterationRecord& r) { its.push_back(r); };
  auto res = solve(p);
  write_iterations_csv(dir / "iterations.csv", its);
  save_field(dir / "groundstate.bsf", res.Q, meta_for(c, res.Q, res.mu));
  return res;
}

inline Outcome trace_outcome(const EvolutionTrace& t) {
  Outcome o;
  o.results["trace"] = to_json(t);
  o.code = t.termination == Termination::completed   ? ExitCode::ok
           : t.termination == Termination::nan_abort ? ExitCode::numerical_failure
                                                     : ExitCode::blowup_suspected;
  o.pass_flags["completed"] = t.termination == Termination::completed;
  return o;
}

/// Evolves with CSV streaming and optional snapshots every k records.
inline EvolutionTrace evolve_to_disk(const RunConfig& c, const Field& psi0, const std::optional<Field>& ref,
                                     const fs::path& dir, EvolutionConfig cfg) {
  TraceCsvWriter csv(dir / "trace.csv");
  cfg.on_record = [&](const TraceRecord& r) { csv.write(r); };
  if (c.snapshot_every > 0) {
    fs::create_directories(dir / "snapshots");
    cfg.on_state = [&, count = 0](const TraceRecord& r, const Field& x) mutable {
      if (count++ % c.snapshot_every != 0) return;
      char name[48];
      std::snprintf(name, sizeof name, "t_%010.4f.bsf", r.t);
      auto meta = meta_for(c, x, std::nullopt);
      meta.metadata["t"] = r.t;
      save_field(dir / "snapshots" / name, x, meta);
    };
  }
  return evolve(psi0, cfg, ref);
}

inline Outcome cmd_groundstate(const RunConfig& c, const fs::path& dir) {
  Outcome o;
  auto res = ground_state(c, dir);
  o.results["groundstate"] = to_json(res);
  o.results["snapshot"] = "groundstate.bsf";
  o.results["iterations_csv"] = "iterations.csv";
  o.pass_flags["converged"] = res.converged;
  o.pass_flags["mu_positive"] = res.mu > 0.0;
  o.pass_flags["mu_bound"] = res.mu_bound_margin > 0.0;
  o.code = res.converged ? ExitCode::ok : ExitCode::numerical_failure;
  return o;
}

inline Outcome cmd_evolve(const RunConfig& c, const fs::path& dir) {
  Field psi0(c.grid());
  std::optional<Field> ref;
  json results;
  if (!c.input.empty()) {
    psi0 = load_field(c.input, c.grid()).field;
    results["input"] = c.input;
  } else {
    auto res = ground_state(c, dir);
    if (!res.converged) {
      Outcome o;
      o.code = ExitCode::numerical_failure;
      o.results["groundstate"] = to_json(res);
      return o;
    }
    results["groundstate"] = to_json(res);
    psi0 = res.Q;
    ref = res.Q;
  }
  auto trace = evolve_to_disk(c, psi0, ref, dir, evolution(c));
  Outcome o = trace_outcome(trace);
  o.results.update(results);
  o.results["trace_csv"] = "trace.csv";
  if (ref && trace.records.size() >= 2) {
    const Vec3 vel = centroid_velocity(trace, c.L);
    o.results["centroid_velocity"] = bstar::to_json(vel);
  }
  return o;
}

inline Outcome cmd_stability(const RunConfig& c, const fs::path& dir) {
  Outcome o;
  auto res = ground_state(c, dir);
  o.results["groundstate"] = to_json(res);
  if (!res.converged) {
    o.code = ExitCode::numerical_failure;
    return o;
  }
  StabilityOptions opt;
  opt.epsilon = c.epsilon;
  opt.seed = c.seed;
  Field psi0 = perturbed_ground_state(res.Q, opt.epsilon, opt.seed, opt.k_band);
  auto trace = evolve_to_disk(c, psi0, res.Q, dir, evolution(c));
  double sup = 0.0;
  for (const auto& r : trace.records) sup = std::max(sup, r.orbit_distance);
  json gs = o.results["groundstate"];
  o = trace_outcome(trace);
  o.results["groundstate"] = gs;
  o.results["epsilon"] = c.epsilon;
  o.results["seed"] = c.seed;
  o.results["sup_distance"] = sup;
  o.results["K_empirical"] = c.epsilon > 0.0 ? json(sup / c.epsilon) : json(nullptr);
  o.results["inconclusive"] = trace.termination != Termination::completed;
  o.results["trace_csv"] = "trace.csv";
  o.pass_flags["bounded"] = trace.termination == Termination::completed && sup <= (c.epsilon > 0 ? 10.0 * c.epsilon : 5e-3);
  return o;
}

inline Outcome cmd_decay(const RunConfig& c, const fs::path& dir) {
  Outcome o;
  auto res = ground_state(c, dir);
  o.results["groundstate"] = to_json(res);
  if (!res.converged) {
    o.code = ExitCode::numerical_failure;
    return o;
  }
  auto fit = decay_fit(res, c.params());
  o.results["decay"] = to_json(fit);
  o.pass_flags["decay"] = fit.pass;
  return o;
}

inline Outcome cmd_bestconst(const RunConfig& c, const fs::path& dir) {
  Outcome o;
  BestConstantOptions opt;
  opt.tol = c.tol;
  opt.max_iter = c.max_iter;
  auto b = best_constant(c.v, c.grid(), opt);
  o.results["bestconst"] = to_json(b);
  o.pass_flags["converged"] = b.converged;
  if (!b.converged) {
    o.results["bestconst"].erase("S");
    o.results["bestconst"].erase("Nc");
    o.code = ExitCode::numerical_failure;
    return o;
  }
  save_field(dir / "optimizer.bsf", b.Q, meta_for(c, b.Q, std::nullopt));
  if (c.v == Vec3{}) {
    o.pass_flags["Nc_above_4_over_pi"] = b.Nc > 4.0 / std::numbers::pi;
    o.pass_flags["S_below_pi_over_2"] = b.S < std::numbers::pi / 2.0;
  }
  if (c.bisect) {
    require(c.m > 0.0, "bisection needs m > 0");
    auto p = problem(c);
    auto bis = critical_charge_bisection(p, 0.5 * b.Nc, 1.5 * b.Nc);
    const double mid = 0.5 * (bis.lower + bis.upper);
    o.results["bisection"] = {{"lower", bis.lower}, {"upper", bis.upper}, {"solves", bis.solves}};
    o.results["bisection_disagreement"] = std::abs(mid - b.Nc) / b.Nc;
    o.pass_flags["resolved"] = std::abs(mid - b.Nc) / b.Nc <= 0.05;
  }
  return o;
}

inline Outcome cmd_blowup(const RunConfig& c, const fs::path& dir, bool explicit_N) {
  const double N = explicit_N ? c.N : 4.0;
  auto datum = blowup_datum(c.grid(), c.params(), N);
  save_field(dir / "datum.bsf", datum.psi, meta_for(c, datum.psi, std::nullopt));
  auto cfg = evolution(c);
  auto trace = evolve_to_disk(c, datum.psi, std::nullopt, dir, cfg);
  Outcome t = trace_outcome(trace);
  t.results["datum"] = {{"N", N}, {"width", datum.width}, {"energy", datum.energy}, {"threshold", datum.threshold}};
  t.results["trace_csv"] = "trace.csv";
  t.pass_flags["guard_fired"] = trace.termination == Termination::blowup_suspected;
  if (c.contrast) {
    Field small = datum.psi;
    small *= std::sqrt(0.1);
    fs::create_directories(dir / "contrast");
    auto ct = evolve_to_disk(c, small, std::nullopt, dir / "contrast", cfg);
    t.results["contrast"] = to_json(ct);
    t.pass_flags["contrast_completed"] = ct.termination == Termination::completed;
  }
  return t;
}

inline Outcome cmd_green(const RunConfig& c, const fs::path&) {
  Outcome o;
  auto g = green_function_probe(c.m, c.v, c.mu, c.grid());
  o.results["green"] = to_json(g);
  o.pass_flags["rate"] = g.pass;
  return o;
}

}  // namespace detail

struct Report {
  int code = ExitCode::ok;
  json body;
};

/// Runs one command in its output directory and returns the report.
inline Report execute(const RunConfig& c, const fs::path& dir, bool explicit_N = true);

inline Outcome cmd_sweep(const RunConfig& c, const fs::path& dir) {
  struct Job {
    double N;
    Vec3 v;
  };
  std::vector<Job> jobs;
  const std::vector<Vec3> speeds = c.sweep_v.empty() ? std::vector<Vec3>{c.v} : c.sweep_v;
  for (const auto& w : speeds)
    for (double N : c.sweep_N) jobs.push_back({N, w});
  std::vector<Report> reports(jobs.size());
  std::atomic<std::size_t> next{0};
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(c.jobs > 0 ? c.jobs : hw, static_cast<unsigned>(jobs.size()));
  auto work = [&] {
    for (std::size_t i; (i = next++) < jobs.size();) {
      RunConfig jc = c;
      jc.command = "groundstate";
      jc.N = jobs[i].N;
      jc.v = jobs[i].v;
      char name[32];
      std::snprintf(name, sizeof name, "job_%03zu", i);
      jc.output = (dir / name).string();
      reports[i] = execute(jc, dir / name);
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();

  Outcome o;
  json list = json::array();
  bool all = true;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "job_%03zu", i);
    list.push_back({{"directory", name},
                    {"N", jobs[i].N},
                    {"v", bstar::to_json(jobs[i].v)},
                    {"exit_code", reports[i].code},
                    {"results", reports[i].body.value("results", json::object())}});
    all = all && reports[i].code == ExitCode::ok;
    o.code = std::max(o.code, reports[i].code);
  }
  o.results["jobs"] = list;
  o.results["workers"] = workers;
  o.pass_flags["all_ok"] = all;
  return o;
}

inline Report execute(const RunConfig& c, const fs::path& dir, bool explicit_N) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  Report rep;
  rep.body = {{"command", c.command}, {"config", to_json(c)}, {"results", json::object()}, {"pass_flags", json::object()}};
  try {
    c.validate();
    fs::create_directories(dir);
    Outcome o;
    if (c.command == "groundstate") o = detail::cmd_groundstate(c, dir);
    else if (c.command == "evolve") o = detail::cmd_evolve(c, dir);
    else if (c.command == "sweep") o = cmd_sweep(c, dir);
    else if (c.command == "stability") o = detail::cmd_stability(c, dir);
    else if (c.command == "decay") o = detail::cmd_decay(c, dir);
    else if (c.command == "bestconst") o = detail::cmd_bestconst(c, dir);
    else if (c.command == "blowup") o = detail::cmd_blowup(c, dir, explicit_N);
    else o = detail::cmd_green(c, dir);
    rep.code = o.code;
    rep.body["results"] = o.results;
    rep.body["pass_flags"] = o.pass_flags;
  } catch (const ValidationError& e) {
    rep.code = ExitCode::validation_error;
    rep.body["error"] = {{"kind", "validation"}, {"message", e.what()}};
  } catch (const SupercriticalError& e) {
    rep.code = ExitCode::numerical_failure;
    rep.body["error"] = {{"kind", "supercritical"}, {"message", e.what()}, {"iteration", e.iteration()}};
  } catch (const NumericalError& e) {
    rep.code = ExitCode::numerical_failure;
    rep.body["error"] = {{"kind", "numerical"}, {"message", e.what()}};
  }
  rep.body["exit_code"] = rep.code;
  rep.body["timings"] = {{"wall_seconds", std::chrono::duration<double>(clock::now() - t0).count()}};
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!ec) write_json(dir / "report.json", rep.body);
  return rep;
}

/// Parses argv into a RunConfig; returns nullopt with an exit code on --help or parse errors.
struct Parsed {
  std::optional<RunConfig> config;
  bool explicit_N = false;
  int code = ExitCode::ok;
};

inline Parsed parse(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Boosted ground states and dynamics of the pseudo-relativistic Hartree equation"};
  app.require_subcommand(1);
  RunConfig c;
  std::string v = "0,0,0", config_path, sweep_v;
  std::vector<double> sweep_N;

  std::map<std::string, CLI::App*> subs;
  for (const auto& name : commands()) {
    auto* s = app.add_subcommand(name);
    s->add_option("--config", config_path, "JSON config or report to start from");
    s->add_option("--m", c.m, "mass m >= 0");
    s->add_option("--v", v, "velocity as vx,vy,vz");
    s->add_option("--N", c.N, "charge");
    s->add_option("--n", c.n, "grid points per axis (power of two)");
    s->add_option("--L", c.L, "box length");
    s->add_option("--tol", c.tol, "solver tolerance");
    s->add_option("--max-iter", c.max_iter, "iteration cap");
    s->add_option("--solver", c.solver, "fixed_point | gradient_flow");
    s->add_option("--dt", c.dt, "time step");
    s->add_option("--t-end", c.t_end, "final time");
    s->add_option("--record-every", c.record_every, "steps between trace records");
    s->add_option("--out", c.output, std::string("output directory (default $") + kOutputEnv + "/<command>)");
    s->add_option("--snapshot-every", c.snapshot_every, "records between snapshots (0 = off)");
    s->add_option("--seed", c.seed, "random seed");
    subs[name] = s;
  }
  subs["evolve"]->add_option("--input", c.input, "BSF1 initial field");
  subs["stability"]->add_option("--epsilon", c.epsilon, "perturbation size");
  subs["green"]->add_option("--mu", c.mu, "resolvent parameter");
  subs["blowup"]->add_flag("--contrast", c.contrast, "also run the 10x charge-reduced datum");
  subs["bestconst"]->add_flag("--bisect", c.bisect, "also bisect N_c with the ground-state solver");
  subs["sweep"]->add_option("--sweep-N", sweep_N, "charges")->delimiter(',');
  subs["sweep"]->add_option("--sweep-v", sweep_v, "velocities separated by ';'");
  subs["sweep"]->add_option("--jobs", c.jobs, "worker threads (0 = hardware)");

  Parsed p;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    p.code = ExitCode::ok;
    return p;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    p.code = ExitCode::validation_error;
    return p;
  }
  CLI::App* sub = app.get_subcommands().front();
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      require(static_cast<bool>(is), "cannot open config " + config_path);
      json j = json::parse(is, nullptr, false);
      require(!j.is_discarded(), "config is not valid JSON");
      RunConfig base = config_from_json(j.contains("config") ? j["config"] : j);
      // Flags given on the command line override the file.
      auto given = [&](const char* flag) { return sub->count(flag) > 0; };
      if (!given("--m")) c.m = base.m;
      if (!given("--N")) c.N = base.N;
      if (!given("--n")) c.n = base.n;
      if (!given("--L")) c.L = base.L;
      if (!given("--tol")) c.tol = base.tol;
      if (!given("--max-iter")) c.max_iter = base.max_iter;
      if (!given("--solver")) c.solver = base.solver;
      if (!given("--dt")) c.dt = base.dt;
      if (!given("--t-end")) c.t_end = base.t_end;
      if (!given("--record-every")) c.record_every = base.record_every;
      if (!given("--snapshot-every")) c.snapshot_every = base.snapshot_every;
      if (!given("--seed")) c.seed = base.seed;
      if (sub->get_option_no_throw("--input") && !given("--input")) c.input = base.input;
      if (sub->get_option_no_throw("--epsilon") && !given("--epsilon")) c.epsilon = base.epsilon;
      if (sub->get_option_no_throw("--mu") && !given("--mu")) c.mu = base.mu;
      if (sub->get_option_no_throw("--contrast") && !given("--contrast")) c.contrast = base.contrast;
      if (sub->get_option_no_throw("--bisect") && !given("--bisect")) c.bisect = base.bisect;
      if (sub->get_option_no_throw("--sweep-N") && !given("--sweep-N")) sweep_N = base.sweep_N;
      if (sub->get_option_no_throw("--jobs") && !given("--jobs")) c.jobs = base.jobs;
      if (!given("--v")) c.v = base.v;
      else c.v = parse_vec3(v);
      if (sub->get_option_no_throw("--sweep-v") && !given("--sweep-v")) c.sweep_v = base.sweep_v;
      p.explicit_N = true;
    } else {
      c.v = parse_vec3(v);
      p.explicit_N = sub->count("--N") > 0;
    }
    c.command = sub->get_name();
    if (!sweep_N.empty()) c.sweep_N = sweep_N;
    if (!sweep_v.empty()) {
      c.sweep_v.clear();
      std::stringstream ss(sweep_v);
      for (std::string item; std::getline(ss, item, ';');) c.sweep_v.push_back(parse_vec3(item));
    }
    if (c.output.empty()) c.output = default_output(c.command).string();
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    p.code = ExitCode::validation_error;
    return p;
  }
  p.config = c;
  return p;
}

/// Full entry point: parse, run, print a one-line summary, return the exit code.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  auto p = parse(argc, argv, out, err);
  if (!p.config) return p.code;
  const RunConfig& c = *p.config;
  Report rep = execute(c, c.output, p.explicit_N);
  if (rep.body.contains("error")) err << "error: " << rep.body["error"]["message"].get<std::string>() << '\n';
  out << c.command << ": exit " << rep.code << ", report " << (fs::path(c.output) / "report.json").string() << '\n';
  return rep.code;
}

}  // namespace bstar::cli
