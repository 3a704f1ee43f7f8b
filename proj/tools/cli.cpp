#include "cli.hpp"

#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nscheme/nscheme.hpp"

namespace nscheme::cli {
namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out = "-";
  std::string gamma_q = "physical";
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "configuration JSON")->required();
  sub->add_option("--set", c.sets, "override a parameter, e.g. laser_R.detuning=3.5 (MHz)");
  sub->add_option("--out", c.out, "output file, '-' for standard output");
  sub->add_option("--gamma-q", c.gamma_q, "decay of |Q>: physical or zero")
      ->check(CLI::IsMember({"physical", "zero"}));
}

ConfigInput load_input(const Common& c, bool apply_gamma_q = true) {
  ConfigInput in = load_config(c.config);
  for (const auto& s : c.sets) apply_override(in, s);
  if (apply_gamma_q && c.gamma_q == "zero") in.atom.gamma_Q_MHz = 0.0;
  return in;
}

class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (path == "-") {
      os_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw Error(ErrorCode::Io, "cannot write '" + path + "'", path);
      os_ = file_.get();
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

Json metadata(const std::string& command, const Common& c, const ConfigInput& in) {
  Json m = build_metadata();
  m["command"] = command;
  m["config"] = c.config;
  m["config_hash"] = config_hash(in);
  m["overrides"] = c.sets;
  m["gamma_Q_mode"] = c.gamma_q;
  return m;
}

Json populations_json(const Populations& p) { return {{"S", p[0]}, {"P", p[1]}, {"D", p[2]}, {"Q", p[3]}}; }

std::pair<double, double> parse_range(const std::string& r) {
  const auto colon = r.find(':', 1);
  if (colon == std::string::npos)
    throw Error(ErrorCode::InvalidParameter, "range '" + r + "' is not start:stop", "range");
  try {
    std::size_t u1 = 0, u2 = 0;
    const std::string a = r.substr(0, colon), b = r.substr(colon + 1);
    const double x = std::stod(a, &u1), y = std::stod(b, &u2);
    if (u1 != a.size() || u2 != b.size()) throw std::invalid_argument(r);
    return {x, y};
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidParameter, "range '" + r + "' is not start:stop", "range");
  }
}

SteadyResult solve_steady(const Superoperator& l, const std::string& from, std::string& method) {
  try {
    method = "bordered";
    return steady_state_detailed(l);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::DegenerateKernel || from.empty()) throw;
    method = "stationary_limit_from_" + from;
    return stationary_limit(l, pure_state(from));
  }
}

// ---------------------------------------------------------------------------

struct SteadyArgs {
  Common c;
  std::string from;
  bool dump = false;
};

int cmd_steady(const SteadyArgs& a, std::ostream& out) {
  const ConfigInput in = load_input(a.c);
  const auto cfg = validate(in);
  if (!a.from.empty()) parse_level(a.from);
  const auto l = carrier_superoperator(cfg);
  std::string method;
  const auto r = solve_steady(l, a.from, method);
  Json j = {{"metadata", metadata("steady", a.c, in)},
            {"populations", populations_json(r.rho.populations())},
            {"residual", r.residual},
            {"relative_gap", r.relative_gap},
            {"method", method},
            {"rho", matrix_to_json(r.rho.matrix())}};
  if (a.dump) {
    j["hamiltonian"] = hamiltonian_to_json(build_hamiltonian(cfg));
    j["superoperator"] = superoperator_to_json(l);
  }
  Output o(a.c.out, out);
  *o << j.dump(2) << '\n';
  return 0;
}

struct ScanArgs {
  Common c;
  std::string axis = "laser_R.detuning";
  std::string range;
  std::size_t points = 2001;
  std::string format;
  std::string from;
  unsigned workers = 0;
  double peaks = -1.0;
  int order = 2;
  int max_order = 8;
  bool no_escalate = false;
};

bool wants_json(const ScanArgs& a) {
  if (!a.format.empty()) return a.format == "json";
  return a.c.out.size() > 5 && a.c.out.substr(a.c.out.size() - 5) == ".json";
}

int run_scan_command(const ScanArgs& a, ScanSolver solver, std::ostream& out, std::ostream& err) {
  const ConfigInput in = load_input(a.c, false);
  ScanSpec spec;
  spec.axis = a.axis;
  std::tie(spec.start, spec.stop) = parse_range(a.range);
  spec.points = a.points;
  spec.solver = solver;
  spec.floquet_order = a.order;
  spec.floquet.escalate = !a.no_escalate;
  spec.floquet.max_order = a.max_order;
  spec.gamma_Q_mode = a.c.gamma_q == "zero" ? GammaQMode::Zero : GammaQMode::Physical;
  if (!a.from.empty()) spec.degenerate_from = parse_level(a.from);
  spec.workers = a.workers;
  validate_scan_spec(in, spec);

  const auto s = run_scan(in, spec);
  std::size_t flagged = 0;
  for (const auto& p : s.points) flagged += p.ok() ? 0 : 1;
  if (flagged) err << "warning: " << flagged << " of " << s.points.size() << " points flagged\n";

  std::vector<Peak> peaks;
  if (a.peaks >= 0.0) {
    peaks = find_peaks(s, Level::Q, a.peaks);
    for (const auto& p : peaks)
      err << "peak P_Q at " << p.location << " MHz, height " << p.height << ", FWHM " << p.fwhm << " MHz\n";
  }
  Output o(a.c.out, out);
  if (wants_json(a)) {
    Json j = spectrum_to_json(s);
    j["metadata"]["command"] = solver == ScanSolver::Carrier ? "scan" : "floquet";
    j["metadata"]["config"] = a.c.config;
    j["metadata"]["overrides"] = a.c.sets;
    if (a.peaks >= 0.0) {
      Json pj = Json::array();
      for (const auto& p : peaks)
        pj.push_back({{"location_MHz", p.location}, {"height", p.height}, {"fwhm_MHz", p.fwhm},
                      {"prominence", p.prominence}});
      j["peaks_P_Q"] = pj;
    }
    *o << j.dump(2) << '\n';
  } else {
    write_spectrum_csv(*o, s);
  }
  return 0;
}

int cmd_floquet(const ScanArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.range.empty()) return run_scan_command(a, ScanSolver::Floquet, out, err);
  const ConfigInput in = load_input(a.c);
  const auto cfg = validate(in);
  FloquetOptions opt;
  opt.escalate = !a.no_escalate;
  opt.max_order = a.max_order;
  const auto fs = solve_floquet_steady(cfg, a.order, opt);
  Json j = floquet_to_json(fs);
  j["metadata"] = metadata("floquet", a.c, in);
  j["populations"] = populations_json(fs.populations());
  const auto eta = lamb_dicke_parameters(cfg);
  j["lamb_dicke"] = {{"eta_B", eta.eta_B}, {"eta_R", eta.eta_R}, {"eta_C", eta.eta_C},
                     {"delta_k_over_kB", eta.delta_k_over_kB}};
  Output o(a.c.out, out);
  *o << j.dump(2) << '\n';
  return 0;
}

struct EvolveArgs {
  Common c;
  std::string initial = "S";
  double t_max = 20000.0;
  double t_min = 1e-3;
  std::size_t points = 2001;
  std::string grid = "log";
  std::string fit;
  bool stepwise = false;
};

int cmd_evolve(const EvolveArgs& a, std::ostream& out, std::ostream& err) {
  const ConfigInput in = load_input(a.c);
  const auto cfg = validate(in);
  const auto rho0 = pure_state(a.initial);
  if (!(a.t_max > 0.0)) throw Error(ErrorCode::InvalidParameter, "--t-max must be > 0", "t_max");
  if (a.points < 2) throw Error(ErrorCode::InvalidParameter, "--points must be >= 2", "points");
  if (a.grid == "log" && !(a.t_min > 0.0 && a.t_min < a.t_max))
    throw Error(ErrorCode::InvalidParameter, "--t-min must lie in (0, t_max)", "t_min");
  const auto t = a.grid == "log" ? log_time_grid(a.t_min, a.t_max, a.points) : linear_time_grid(a.t_max, a.points);
  EvolveOptions opt;
  if (a.stepwise) opt.propagator.max_condition = 0.0;
  const auto tr = evolve(carrier_superoperator(cfg), rho0, t, opt);
  if (tr.method == PropagationMethod::Stepwise && !a.stepwise)
    err << "note: ill-conditioned eigenbasis, used stepwise integration\n";
  {
    Output o(a.c.out, out);
    write_trace_csv(*o, tr);
  }
  if (!a.fit.empty()) {
    const auto ts = fit_timescales(tr);
    Json j = {{"metadata", metadata("evolve", a.c, in)},
              {"fast_us", ts.fast_us},
              {"slow_us", ts.slow_us},
              {"oscillation_contrast", ts.oscillation_contrast},
              {"rabi_frequency_rad_per_us", ts.rabi_frequency ? Json(*ts.rabi_frequency) : Json(nullptr)},
              {"rabi_frequency_MHz",
               ts.rabi_frequency ? Json(rad_per_us_to_mhz(*ts.rabi_frequency)) : Json(nullptr)}};
    Output o(a.fit, out);
    *o << j.dump(2) << '\n';
  }
  return 0;
}

struct TrajArgs {
  Common c;
  std::string initial = "S";
  double t_max = 30000.0;
  std::size_t n_traj = 1;
  std::uint64_t seed = 1;
  unsigned workers = 0;
  std::string stats;
  double dark_threshold = 0.0;
};

int cmd_traj(const TrajArgs& a, std::ostream& out, std::ostream& err) {
  const ConfigInput in = load_input(a.c);
  const auto cfg = validate(in);
  Vec4 psi = Vec4::Zero();
  psi[idx(parse_level(a.initial))] = 1.0;
  if (a.n_traj < 1) throw Error(ErrorCode::InvalidParameter, "--n-traj must be >= 1", "n_traj");
  require_trajectory_config(cfg);
  const auto records = run_trajectories(cfg, psi, a.t_max, a.n_traj, a.seed, a.workers);
  std::size_t jumps = 0;
  for (const auto& r : records) jumps += r.jump_times.size();
  err << records.size() << " trajectories, " << jumps << " jumps\n";
  {
    Output o(a.c.out, out);
    write_photon_csv(*o, records, cfg);
  }
  if (!a.stats.empty()) {
    const double thr = a.dark_threshold > 0.0 ? a.dark_threshold : default_dark_threshold(cfg);
    const auto st = bright_dark_statistics(std::span<const TrajectoryRecord>(records), thr);
    Json j = statistics_to_json(st);
    j["metadata"] = metadata("traj", a.c, in);
    j["metadata"]["seed"] = a.seed;
    j["metadata"]["n_traj"] = a.n_traj;
    j["metadata"]["t_max_us"] = a.t_max;
    Output o(a.stats, out);
    *o << j.dump(2) << '\n';
  }
  return 0;
}

struct G2Args {
  Common c;
  double tau_max = 200.0;
  std::size_t points = 2001;
  std::string channel = "all";
  std::string from;
};

int cmd_g2(const G2Args& a, std::ostream& out) {
  const ConfigInput in = load_input(a.c);
  const auto cfg = validate(in);
  if (!(a.tau_max > 0.0) || a.points < 2)
    throw Error(ErrorCode::InvalidParameter, "--tau-max must be > 0 and --points >= 2", "tau_max");
  const auto l = carrier_superoperator(cfg);
  std::string method;
  const auto r = solve_steady(l, a.from, method);
  const auto tau = linear_time_grid(a.tau_max, a.points);
  const auto g = g2(l, cfg, r.rho, tau, a.channel == "blue" ? DetectionChannel::BlueOnly : DetectionChannel::AllP);
  Output o(a.c.out, out);
  *o << "tau_us,g2\n";
  char buf[64];
  for (std::size_t i = 0; i < tau.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", tau[i], g[i]);
    *o << buf;
  }
  return 0;
}

struct DressedArgs {
  Common c;
  double velocity = 1.0;
};

int cmd_dressed(const DressedArgs& a, std::ostream& out) {
  const ConfigInput in = load_input(a.c);
  const auto cfg = validate(in);
  const auto mm = resonance_mismatches(cfg);
  Json j = {{"metadata", metadata("dressed", a.c, in)},
            {"resonance_mismatches_MHz",
             {{"three_photon", rad_per_us_to_mhz(mm.three_photon)},
              {"two_photon", rad_per_us_to_mhz(mm.two_photon)},
              {"carrier_C", rad_per_us_to_mhz(mm.carrier_C)}}}};
  try {
    j["three_photon"] = report_to_json(three_photon_report(cfg));
    j["doppler"] = {{"velocity_m_per_s", a.velocity},
                    {"delta_k_per_m", wavevector_mismatch_per_m(cfg)},
                    {"rate_rad_per_us", doppler_rate(cfg, a.velocity)}};
  } catch (const Error& e) {
    j["three_photon"] = {{"error", std::string(e.name())}, {"message", e.what()}};
  }
  try {
    j["lambda"] = eigensystem_to_json(lambda_eigensystem(cfg));
  } catch (const Error& e) {
    j["lambda"] = {{"error", std::string(e.name())}, {"message", e.what()}};
  }
  Output o(a.c.out, out);
  *o << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Steady states, dynamics, quantum jumps and sideband spectra of the S-P-D-Q N-scheme.\n"
               "All frequencies are in MHz and mean 2pi x value; times are in microseconds."};
  app.set_version_flag("--version", std::string("nscheme ") + kVersion + " (" + kGitDescribe + ")");
  app.require_subcommand(1);

  SteadyArgs steady;
  auto* s_steady = app.add_subcommand("steady", "stationary populations");
  add_common(s_steady, steady.c);
  s_steady->add_option("--from", steady.from, "if the kernel is degenerate, use the limit reached from this level");
  s_steady->add_flag("--dump", steady.dump, "include the Hamiltonian parts and the generator");

  ScanArgs scan;
  auto* s_scan = app.add_subcommand("scan", "steady-state spectrum along one parameter");
  add_common(s_scan, scan.c);
  s_scan->add_option("--axis", scan.axis, "parameter path");
  s_scan->add_option("--range", scan.range, "start:stop in the axis units (MHz for frequencies)")->required();
  s_scan->add_option("--points", scan.points, "grid points");
  s_scan->add_option("--format", scan.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  s_scan->add_option("--from", scan.from, "resolve degenerate points by the limit reached from this level");
  s_scan->add_option("--workers", scan.workers, "worker threads (default NSCHEME_WORKERS or all cores)");
  s_scan->add_option("--peaks", scan.peaks, "report P_Q peaks with at least this prominence");

  ScanArgs flo;
  auto* s_flo = app.add_subcommand("floquet", "stationary Fourier blocks with trap motion, or a sideband spectrum");
  add_common(s_flo, flo.c);
  s_flo->add_option("--order", flo.order, "truncation order N");
  s_flo->add_option("--max-order", flo.max_order, "highest order tried by the convergence check");
  s_flo->add_flag("--no-escalate", flo.no_escalate, "fail instead of raising the order");
  s_flo->add_option("--axis", flo.axis, "parameter path for a spectrum");
  s_flo->add_option("--range", flo.range, "start:stop; gives a spectrum instead of a single solve");
  s_flo->add_option("--points", flo.points, "grid points");
  s_flo->add_option("--format", flo.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  s_flo->add_option("--workers", flo.workers, "worker threads");
  s_flo->add_option("--peaks", flo.peaks, "report P_Q peaks with at least this prominence");

  EvolveArgs ev;
  auto* s_ev = app.add_subcommand("evolve", "population trace rho(t) from a pure level");
  add_common(s_ev, ev.c);
  s_ev->add_option("--initial", ev.initial, "initial level S, P, D or Q");
  s_ev->add_option("--t-max", ev.t_max, "final time (us)");
  s_ev->add_option("--t-min", ev.t_min, "first nonzero time of the log grid (us)");
  s_ev->add_option("--points", ev.points, "grid points");
  s_ev->add_option("--grid", ev.grid, "log or linear")->check(CLI::IsMember({"log", "linear"}));
  s_ev->add_option("--fit", ev.fit, "write fitted timescales as JSON to this file");
  s_ev->add_flag("--stepwise", ev.stepwise, "integrate with adaptive Runge-Kutta instead of eigen-propagation");

  TrajArgs tj;
  auto* s_tj = app.add_subcommand("traj", "quantum-jump trajectories; writes the photon record");
  add_common(s_tj, tj.c);
  s_tj->add_option("--initial", tj.initial, "initial level");
  s_tj->add_option("--t-max", tj.t_max, "length of each trajectory (us)");
  s_tj->add_option("--n-traj", tj.n_traj, "number of trajectories");
  s_tj->add_option("--seed", tj.seed, "master seed");
  s_tj->add_option("--workers", tj.workers, "worker threads");
  s_tj->add_option("--stats", tj.stats, "write bright/dark statistics JSON to this file");
  s_tj->add_option("--dark-threshold", tj.dark_threshold, "gap (us) that splits bright periods");

  G2Args g;
  auto* s_g2 = app.add_subcommand("g2", "fluorescence intensity correlation");
  add_common(s_g2, g.c);
  s_g2->add_option("--tau-max", g.tau_max, "largest delay (us)");
  s_g2->add_option("--points", g.points, "grid points");
  s_g2->add_option("--channel", g.channel, "all or blue")->check(CLI::IsMember({"all", "blue"}));
  s_g2->add_option("--from", g.from, "if the kernel is degenerate, use the limit reached from this level");

  DressedArgs dr;
  auto* s_dr = app.add_subcommand("dressed", "closed-form dressed-state reports");
  add_common(s_dr, dr.c);
  s_dr->add_option("--velocity", dr.velocity, "ion velocity for the Doppler coupling (m/s)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (s_steady->parsed()) return cmd_steady(steady, out);
    if (s_scan->parsed()) return run_scan_command(scan, ScanSolver::Carrier, out, err);
    if (s_flo->parsed()) return cmd_floquet(flo, out, err);
    if (s_ev->parsed()) return cmd_evolve(ev, out, err);
    if (s_tj->parsed()) return cmd_traj(tj, out, err);
    if (s_g2->parsed()) return cmd_g2(g, out);
    if (s_dr->parsed()) return cmd_dressed(dr, out);
  } catch (const Error& e) {
    err << "error: " << e.what();
    if (!e.field().empty()) err << " [" << e.field() << "]";
    err << '\n';
    return is_validation_error(e.code()) ? 1 : 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: InvalidParameter: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace nscheme::cli
