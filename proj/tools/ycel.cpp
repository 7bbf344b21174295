// ycel: command-line front end for the correlated-emission laser simulator.
//
//   ycel prefactors --eta1 0 --eta2 0
//   ycel evolve --eta1 0 --eta2 0 --A 0.5 --t 10
//   ycel steady --eta1 1 --eta2 1
//   ycel oracle --eta1 -0.5 --eta2 -0.5 --A 0.5 --nmax 6
//   ycel sweep --eta-grid 21x21 --A 0.5
//
// Exit codes: 0 success, 2 invalid input, 3 instability / truncation /
// integrator failure, 1 anything else.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>

#include "ycel/dynamics.hpp"
#include "ycel/entanglement.hpp"
#include "ycel/errors.hpp"
#include "ycel/fock_oracle.hpp"
#include "ycel/io.hpp"
#include "ycel/model.hpp"

using namespace ycel;
using io::json;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitNumerical = 3;

const std::set<std::string> kConfigKeys{
    "command", "units",  "backend", "r_a",      "g",       "gamma",    "kappa",
    "A",       "eta1",   "eta2",    "t",        "samples", "route",    "nmax",
    "dt",      "edge_tol", "halving", "eta_grid", "mode",  "threads",  "optimize"};

/// Value of one setting: command line first, then the config file, then the default.
class Settings {
 public:
  void set_config(json cfg) {
    for (const auto& [k, v] : cfg.items())
      if (!kConfigKeys.count(k)) throw ConfigurationError("unknown configuration key '" + k + "'");
    config_ = std::move(cfg);
  }

  template <class T>
  std::optional<T> lookup(const CLI::Option* flag, const T& cli_value, const std::string& key) const {
    if (flag && flag->count() > 0) return cli_value;
    if (config_.contains(key)) {
      try {
        const auto& v = config_.at(key);
        if constexpr (std::is_same_v<T, std::string>) {
          if (v.is_number()) return io::format_number(v.get<double>());
        }
        return v.get<T>();
      } catch (const json::exception&) {
        throw ConfigurationError("configuration key '" + key + "' has the wrong type");
      }
    }
    return std::nullopt;
  }

  template <class T>
  T get(const CLI::Option* flag, const T& cli_value, const std::string& key, const T& fallback) const {
    return lookup(flag, cli_value, key).value_or(fallback);
  }

 private:
  json config_ = json::object();
};

struct Globals {
  std::string config_path, out_path;
  std::string format = "csv";
  std::string backend = "ehrenfest";
  std::string units = "kappa";
  double r_a = 0, g = 1, gamma = 20, kappa = 1, A = 0.5, eta1 = 0, eta2 = 0;
  CLI::Option *o_backend{}, *o_units{}, *o_r_a{}, *o_g{}, *o_gamma{}, *o_kappa{}, *o_A{},
      *o_eta1{}, *o_eta2{};
};

struct Model {
  ModelParams<double> params;
  Prefactors<double> pref;
  Backend backend = Backend::ehrenfest;
  std::string units;
};

Backend parse_backend(const std::string& s) {
  if (s == "ehrenfest") return Backend::ehrenfest;
  if (s == "paper-literal" || s == "paper_literal") return Backend::paper_literal;
  throw ConfigurationError("backend must be 'ehrenfest' or 'paper-literal', got '" + s + "'");
}

Model resolve_model(const Globals& gl, const Settings& st) {
  Model m;
  m.units = st.get(gl.o_units, gl.units, "units", std::string("kappa"));
  if (m.units != "kappa" && m.units != "absolute")
    throw ConfigurationError("units must be 'kappa' or 'absolute'");
  m.backend = parse_backend(st.get(gl.o_backend, gl.backend, "backend", std::string("ehrenfest")));

  auto& p = m.params;
  p.g = st.get(gl.o_g, gl.g, "g", 1.0);
  p.gamma = st.get(gl.o_gamma, gl.gamma, "gamma", 20.0);
  p.kappa = st.get(gl.o_kappa, gl.kappa, "kappa", 1.0);
  p.eta1 = st.get(gl.o_eta1, gl.eta1, "eta1", 0.0);
  p.eta2 = st.get(gl.o_eta2, gl.eta2, "eta2", 0.0);
  if (m.units == "kappa" && p.kappa != 1.0)
    throw ConfigurationError("in kappa units the cavity damping is 1; use --units absolute to set --kappa");

  const auto r_a = st.lookup(gl.o_r_a, gl.r_a, "r_a");
  const auto A = st.lookup(gl.o_A, gl.A, "A");
  if (r_a) {
    p.r_a = *r_a;
    if (A) {
      const double implied = gain_scale(p.r_a, p.g, p.gamma);
      if (std::abs(implied - *A) > 1e-12 * std::max(1.0, std::abs(*A)))
        throw ConfigurationError("r_a and A disagree: 2 r_a g^2 / gamma^2 = " +
                                 io::format_number(implied) + " but A = " + io::format_number(*A));
    }
  } else {
    p.r_a = A.value_or(0.5) * p.gamma * p.gamma / (2 * p.g * p.g);
  }
  validate(p);
  m.pref = prefactors(p);
  for (const auto& w : advisories(p)) std::cerr << "warning: " << w << "\n";
  return m;
}

json model_config(const std::string& command, const Model& m) {
  json c;
  c["command"] = command;
  c["units"] = m.units;
  c["backend"] = to_string(m.backend);
  c["r_a"] = m.params.r_a;
  c["g"] = m.params.g;
  c["gamma"] = m.params.gamma;
  c["kappa"] = m.params.kappa;
  c["A"] = m.pref.A;
  c["eta1"] = m.params.eta1;
  c["eta2"] = m.params.eta2;
  return c;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw ConfigurationError("cannot open output file '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::string eigen_text(const Vector3c<double>& ev) {
  std::ostringstream os;
  for (int i = 0; i < 3; ++i) {
    if (i) os << " ";
    os << io::format_number(ev(i).real());
    if (ev(i).imag() != 0) os << (ev(i).imag() > 0 ? "+" : "") << io::format_number(ev(i).imag()) << "i";
  }
  return os.str();
}

std::vector<double> sample_times(double t, int samples) {
  if (!(t >= 0)) throw ConfigurationError("t must be nonnegative");
  if (samples < 1) throw ConfigurationError("samples must be at least 1");
  std::vector<double> out;
  for (int i = 0; i <= samples; ++i) out.push_back(t * double(i) / double(samples));
  return out;
}

// ---------------------------------------------------------------------------

void cmd_prefactors(const Globals& gl, const Settings& st) {
  const Model m = resolve_model(gl, st);
  const auto prep = populations_from_inversions(m.params.eta1, m.params.eta2);
  const auto& f = m.pref;
  const double res_e = std::abs(f.E - std::sqrt(f.B * f.C));
  const double res_f = std::abs(f.F - std::sqrt(f.B * f.D));
  const double res_g = std::abs(f.G - std::sqrt(f.C * f.D));
  const double res_sum = std::abs(f.B + f.C + f.D - 0.5);
  json cfg = model_config("prefactors", m);
  cfg.erase("backend");
  Output out(gl.out_path);
  if (gl.format == "json") {
    json doc{{"config", cfg},
             {"preparation", io::to_json(prep)},
             {"prefactors", io::to_json(f)},
             {"residues", {{"E", res_e}, {"F", res_f}, {"G", res_g}, {"B+C+D-1/2", res_sum}}},
             {"advisories", advisories(m.params)}};
    out.stream() << doc.dump(2) << "\n";
    return;
  }
  std::vector<std::pair<std::string, double>> items{
      {"rho00", prep.rho00}, {"rho22", prep.rho22}, {"rho33", prep.rho33},
      {"rho32", prep.rho32}, {"rho30", prep.rho30}, {"rho20", prep.rho20},
      {"A", f.A}, {"B", f.B}, {"C", f.C}, {"D", f.D}, {"E", f.E}, {"F", f.F}, {"G", f.G},
      {"residue_E", res_e}, {"residue_F", res_f}, {"residue_G", res_g}, {"residue_sum", res_sum}};
  auto& os = out.stream();
  io::write_comments(os, cfg, {});
  os << "quantity,value\n";
  for (const auto& [k, v] : items) os << k << "," << io::format_number(v) << "\n";
}

struct EvolveArgs {
  double t = 10;
  int samples = 10;
  std::string route = "auto";
  CLI::Option *o_t{}, *o_samples{}, *o_route{};
};

RouteChoice parse_route(const std::string& s) {
  if (s == "auto") return RouteChoice::automatic;
  if (s == "closed-form" || s == "closed_form") return RouteChoice::closed_form;
  if (s == "ode") return RouteChoice::ode;
  throw ConfigurationError("route must be auto, closed-form or ode");
}

void cmd_evolve(const Globals& gl, const Settings& st, const EvolveArgs& a) {
  const Model m = resolve_model(gl, st);
  const double t = st.get(a.o_t, a.t, "t", 10.0);
  const int samples = st.get(a.o_samples, a.samples, "samples", 10);
  const std::string route = st.get(a.o_route, a.route, "route", std::string("auto"));
  EvolveOptions<double> opts;
  opts.route = parse_route(route);

  const auto sys = linear_system(m.pref, m.params.kappa, m.backend);
  const auto verdict = is_stable(sys.drift);
  const auto traj = second_moment_trajectory(sys, sample_times(t, samples), opts);

  json cfg = model_config("evolve", m);
  cfg["t"] = t;
  cfg["samples"] = samples;
  cfg["route"] = route;
  Output out(gl.out_path);
  if (gl.format == "json") {
    json pts = json::array();
    for (const auto& p : traj.points) {
      json row = io::to_json(p.moments);
      row["t"] = p.t;
      pts.push_back(row);
    }
    json doc{{"config", cfg},
             {"route", to_string(traj.route)},
             {"eigenvalues", io::to_json(verdict.eigenvalues)},
             {"margin", verdict.margin},
             {"stable", verdict.stable},
             {"samples", pts}};
    out.stream() << doc.dump(2) << "\n";
    return;
  }
  io::write_csv(out.stream(), cfg,
                {"route used = " + std::string(to_string(traj.route)),
                 "eigenvalues = " + eigen_text(verdict.eigenvalues),
                 "margin = " + io::format_number(verdict.margin)},
                io::trajectory_table(traj));
}

struct SteadyArgs {
  bool no_optimize = false;
  CLI::Option* o_no_optimize{};
};

void cmd_steady(const Globals& gl, const Settings& st, const SteadyArgs& a) {
  const Model m = resolve_model(gl, st);
  const bool optimize = st.get(a.o_no_optimize, !a.no_optimize, "optimize", true);
  const auto sys = linear_system(m.pref, m.params.kappa, m.backend);
  const auto verdict = is_stable(sys.drift);
  const auto s = steady_state_moments(sys);
  const auto cov = CovarianceMatrix::from_moments(s);
  const auto report = vlf_evaluate(cov, optimize ? optimize_gains(cov) : default_gains());

  json cfg = model_config("steady", m);
  cfg["optimize"] = optimize;
  Output out(gl.out_path);
  if (gl.format == "json") {
    json doc{{"config", cfg},
             {"eigenvalues", io::to_json(verdict.eigenvalues)},
             {"margin", verdict.margin},
             {"moments", io::to_json(s)},
             {"witness", io::to_json(report)}};
    out.stream() << doc.dump(2) << "\n";
    return;
  }
  std::vector<std::string> extra{"eigenvalues = " + eigen_text(verdict.eigenvalues),
                                 "margin = " + io::format_number(verdict.margin)};
  for (const auto& r : report.records)
    extra.push_back(std::string("witness ") + to_string(r.grouping) + ": ratio = " +
                    io::format_number(r.ratio) + (r.violated ? " (violated)" : ""));
  extra.push_back(std::string("fully inseparable = ") + (report.fully_inseparable ? "yes" : "no"));
  io::CsvTable t;
  t.columns = io::moment_columns();
  const auto v = s.values();
  t.rows.push_back({v.begin(), v.end()});
  io::write_csv(out.stream(), cfg, extra, t);
}

struct OracleArgs {
  double t = 10;
  int samples = 10;
  std::string nmax;
  double dt = 0.02;
  double edge_tol = 1e-2;
  bool no_halving = false;
  CLI::Option *o_t{}, *o_samples{}, *o_nmax{}, *o_dt{}, *o_edge{}, *o_no_halving{};
};

fock::Cutoffs parse_cutoffs(const std::string& s) {
  static const std::regex one(R"(\s*(\d+)\s*)");
  static const std::regex three(R"(\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*)");
  std::smatch mt;
  if (std::regex_match(s, mt, one)) {
    const int n = std::stoi(mt[1]);
    return {n, n, n};
  }
  if (std::regex_match(s, mt, three)) return {std::stoi(mt[1]), std::stoi(mt[2]), std::stoi(mt[3])};
  throw ConfigurationError("nmax must be N or N1,N2,N3, got '" + s + "'");
}

void cmd_oracle(const Globals& gl, const Settings& st, const OracleArgs& a) {
  const Model m = resolve_model(gl, st);
  fock::FockConfig cfg;
  cfg.t_final = st.get(a.o_t, a.t, "t", 10.0);
  const int samples = st.get(a.o_samples, a.samples, "samples", 10);
  cfg.dt = st.get(a.o_dt, a.dt, "dt", 0.02);
  cfg.edge_tol = st.get(a.o_edge, a.edge_tol, "edge_tol", 1e-2);
  cfg.verify_step_halving = st.get(a.o_no_halving, !a.no_halving, "halving", true);
  const auto times = sample_times(cfg.t_final, samples);

  std::string nmax_text = st.get(a.o_nmax, a.nmax, "nmax", std::string());
  if (!nmax_text.empty()) {
    cfg.n_max = parse_cutoffs(nmax_text);
  } else {
    // size the truncation from the moment equations' photon numbers
    const auto traj = second_moment_trajectory(
        linear_system(m.pref, m.params.kappa, Backend::ehrenfest), times);
    std::array<double, 3> peak{0, 0, 0};
    for (const auto& p : traj.points) {
      peak[0] = std::max(peak[0], p.moments.n1);
      peak[1] = std::max(peak[1], p.moments.n2);
      peak[2] = std::max(peak[2], p.moments.n3);
    }
    cfg.n_max = fock::suggest_cutoffs(peak, cfg.edge_tol);
    nmax_text = std::to_string(cfg.n_max[0]) + "," + std::to_string(cfg.n_max[1]) + "," +
                std::to_string(cfg.n_max[2]);
  }
  cfg.validate();

  const fock::FockSpace space(cfg.n_max);
  const auto run = fock::integrate(fock::DensityState::vacuum(space), cfg, m.pref,
                                   m.params.kappa, times);

  json jc = model_config("oracle", m);
  jc.erase("backend");
  jc["t"] = cfg.t_final;
  jc["samples"] = samples;
  jc["nmax"] = nmax_text;
  jc["dt"] = cfg.dt;
  jc["edge_tol"] = cfg.edge_tol;
  jc["halving"] = cfg.verify_step_halving;
  Output out(gl.out_path);
  if (gl.format == "json") {
    json pts = json::array();
    for (const auto& s : run.samples) {
      json row = io::to_json(s.moments.closure());
      row["t"] = s.t;
      row["trace_residue"] = s.trace_residue;
      row["edge_population"] = s.edge_population;
      row["outside_closure"] = s.moments.outside_closure();
      pts.push_back(row);
    }
    json doc{{"config", jc},
             {"dt_used", run.dt},
             {"tracked_entries", run.tracked_entries},
             {"step_halving_difference", run.step_halving_difference},
             {"min_eigenvalue", std::isfinite(run.min_eigenvalue) ? json(run.min_eigenvalue) : json(nullptr)},
             {"samples", pts}};
    out.stream() << doc.dump(2) << "\n";
    return;
  }
  io::write_csv(out.stream(), jc,
                {"dt used = " + io::format_number(run.dt),
                 "tracked entries = " + std::to_string(run.tracked_entries),
                 "step halving difference = " + io::format_number(run.step_halving_difference),
                 "min eigenvalue = " + io::format_number(run.min_eigenvalue)},
                io::oracle_table(run));
}

struct SweepArgs {
  std::string grid = "21x21";
  std::string mode = "steady";
  double t = 10;
  unsigned threads = 0;
  bool no_optimize = false;
  CLI::Option *o_grid{}, *o_mode{}, *o_t{}, *o_threads{}, *o_no_optimize{};
};

void cmd_sweep(const Globals& gl, const Settings& st, const SweepArgs& a) {
  const Model m = [&] {
    // the template only needs rates; eta is swept
    Globals g = gl;
    g.o_eta1 = g.o_eta2 = nullptr;
    Settings s = st;
    return resolve_model(g, s);
  }();
  const std::string grid = st.get(a.o_grid, a.grid, "eta_grid", std::string("21x21"));
  static const std::regex re(R"(\s*(\d+)\s*x\s*(\d+)\s*)");
  std::smatch mt;
  if (!std::regex_match(grid, mt, re))
    throw ConfigurationError("eta-grid must look like NxM, got '" + grid + "'");
  const int n1 = std::stoi(mt[1]), n2 = std::stoi(mt[2]);

  SweepOptions opts;
  opts.A = m.pref.A;
  opts.kappa = m.params.kappa;
  opts.backend = m.backend;
  const std::string mode = st.get(a.o_mode, a.mode, "mode", std::string("steady"));
  if (mode == "steady") {
    opts.mode = SweepMode::steady;
  } else if (mode == "time") {
    opts.mode = SweepMode::fixed_time;
  } else {
    throw ConfigurationError("mode must be 'steady' or 'time'");
  }
  opts.t = st.get(a.o_t, a.t, "t", 10.0);
  opts.threads = unsigned(st.get<int>(a.o_threads, int(a.threads), "threads", 0));
  opts.optimize = st.get(a.o_no_optimize, !a.no_optimize, "optimize", true);

  const auto rows = sweep(eta_grid(n1, n2), opts);

  json cfg = model_config("sweep", m);
  cfg.erase("eta1");
  cfg.erase("eta2");
  cfg["eta_grid"] = std::to_string(n1) + "x" + std::to_string(n2);
  cfg["mode"] = mode;
  if (opts.mode == SweepMode::fixed_time) cfg["t"] = opts.t;
  cfg["optimize"] = opts.optimize;
  Output out(gl.out_path);
  if (gl.format == "json") {
    json jr = json::array();
    for (const auto& r : rows) jr.push_back(io::to_json(r));
    out.stream() << json{{"config", cfg}, {"rows", jr}}.dump(2) << "\n";
    return;
  }
  std::size_t valid = 0;
  for (const auto& r : rows) valid += r.valid;
  io::write_csv(out.stream(), cfg,
                {"points = " + std::to_string(rows.size()) + ", inside triangle = " +
                 std::to_string(valid)},
                io::sweep_table(rows));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coherently prepared Y-shaped four-level correlated-emission laser simulator"};
  app.fallthrough();
  app.require_subcommand(1);

  Globals gl;
  app.add_option("--config", gl.config_path, "key = value or JSON configuration file");
  app.add_option("--out", gl.out_path, "output file (default stdout)");
  app.add_option("--format", gl.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  gl.o_backend = app.add_option("--backend", gl.backend, "moment backend")
                     ->check(CLI::IsMember({"ehrenfest", "paper-literal"}));
  gl.o_units = app.add_option("--units", gl.units, "rate units")
                   ->check(CLI::IsMember({"kappa", "absolute"}));
  gl.o_r_a = app.add_option("--r_a,--r-a", gl.r_a, "atom injection rate");
  gl.o_g = app.add_option("--g", gl.g, "atom-field coupling (default 1)");
  gl.o_gamma = app.add_option("--gamma", gl.gamma, "atomic decay rate (default 20)");
  gl.o_kappa = app.add_option("--kappa", gl.kappa, "cavity damping (default 1)");
  gl.o_A = app.add_option("--A", gl.A, "gain scale 2 r_a g^2/gamma^2 (default 0.5)");
  gl.o_eta1 = app.add_option("--eta1", gl.eta1, "inversion rho00 - rho33");
  gl.o_eta2 = app.add_option("--eta2", gl.eta2, "inversion rho00 - rho22");

  auto* prefactors_cmd = app.add_subcommand("prefactors", "populations and master-equation prefactors");

  EvolveArgs ev;
  auto* evolve_cmd = app.add_subcommand("evolve", "second moments from vacuum");
  ev.o_t = evolve_cmd->add_option("--t", ev.t, "horizon");
  ev.o_samples = evolve_cmd->add_option("--samples", ev.samples, "intervals between 0 and t");
  ev.o_route = evolve_cmd->add_option("--route", ev.route, "auto, closed-form or ode");

  SteadyArgs sa;
  auto* steady_cmd = app.add_subcommand("steady", "Lyapunov steady state and witnesses");
  sa.o_no_optimize = steady_cmd->add_flag("--no-optimize", sa.no_optimize, "default gains only");

  OracleArgs oa;
  auto* oracle_cmd = app.add_subcommand("oracle", "truncated Fock-space master equation");
  oa.o_t = oracle_cmd->add_option("--t", oa.t, "horizon");
  oa.o_samples = oracle_cmd->add_option("--samples", oa.samples, "intervals between 0 and t");
  oa.o_nmax = oracle_cmd->add_option("--nmax", oa.nmax, "cutoff N or N1,N2,N3 (default: sized from the moments)");
  oa.o_dt = oracle_cmd->add_option("--dt", oa.dt, "RK4 step");
  oa.o_edge = oracle_cmd->add_option("--edge-tol", oa.edge_tol, "largest allowed edge population");
  oa.o_no_halving = oracle_cmd->add_flag("--no-halving", oa.no_halving, "skip the dt/2 check");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "witness sweep over the preparation triangle");
  sw.o_grid = sweep_cmd->add_option("--eta-grid", sw.grid, "NxM points over [-1,1]^2");
  sw.o_mode = sweep_cmd->add_option("--mode", sw.mode, "steady or time");
  sw.o_t = sweep_cmd->add_option("--t", sw.t, "horizon for --mode time");
  sw.o_threads = sweep_cmd->add_option("--threads", sw.threads, "worker threads (default YCEL_THREADS or all cores)");
  sw.o_no_optimize = sweep_cmd->add_flag("--no-optimize", sw.no_optimize, "default gains only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    Settings st;
    if (!gl.config_path.empty()) st.set_config(io::load_config(gl.config_path));
    if (prefactors_cmd->parsed()) cmd_prefactors(gl, st);
    if (evolve_cmd->parsed()) cmd_evolve(gl, st, ev);
    if (steady_cmd->parsed()) cmd_steady(gl, st, sa);
    if (oracle_cmd->parsed()) cmd_oracle(gl, st, oa);
    if (sweep_cmd->parsed()) cmd_sweep(gl, st, sw);
  } catch (const ConfigurationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const DegenerateWitnessError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const InstabilityError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const TruncationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const IntegratorError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegeneracyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
