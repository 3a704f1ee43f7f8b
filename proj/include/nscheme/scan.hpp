#pragma once

// One-dimensional parameter sweeps of the stationary populations (carrier or Floquet
// solver), and peak finding on the resulting spectra.

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nscheme/config_io.hpp"
#include "nscheme/floquet.hpp"
#include "nscheme/parallel.hpp"
#include "nscheme/steady.hpp"
#include "nscheme/version.hpp"

namespace nscheme {

enum class ScanSolver { Carrier, Floquet };
enum class GammaQMode { Physical, Zero };

struct ScanSpec {
  std::string axis = "laser_R.detuning";  ///< dotted parameter path
  double start = 0.0;                     ///< in the axis' input units (MHz for frequencies)
  double stop = 1.0;
  std::size_t points = 2;
  ScanSolver solver = ScanSolver::Carrier;
  int floquet_order = 2;
  FloquetOptions floquet;
  GammaQMode gamma_Q_mode = GammaQMode::Physical;
  /// When set, carrier points whose generator has a degenerate kernel are resolved by the
  /// stationary limit reached from this level instead of being flagged.
  std::optional<Level> degenerate_from;
  unsigned workers = 0;  ///< 0 = default_workers()

  double value(std::size_t i) const {
    if (i + 1 == points) return stop;
    return start + (stop - start) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
};

struct SpectrumPoint {
  double axis = 0.0;
  Populations populations{};
  double residual = std::numeric_limits<double>::quiet_NaN();
  std::string flag = "ok";  ///< "ok" or the name of the error that stopped this point
  double pairing_error = std::numeric_limits<double>::quiet_NaN();  ///< Floquet only
  int order = 0;                                                     ///< Floquet order used

  bool ok() const { return flag == "ok"; }
};

struct Spectrum {
  ScanSpec spec;
  std::string config_hash;
  std::vector<SpectrumPoint> points;

  std::vector<double> axis() const {
    std::vector<double> v;
    for (const auto& p : points) v.push_back(p.axis);
    return v;
  }
  std::vector<double> series(Level l) const {
    std::vector<double> v;
    for (const auto& p : points) v.push_back(p.populations[static_cast<std::size_t>(idx(l))]);
    return v;
  }
};

inline void validate_scan_spec(const ConfigInput& base, const ScanSpec& spec) {
  if (spec.points < 2) throw Error(ErrorCode::InvalidParameter, "a scan needs at least 2 points", "points");
  if (!std::isfinite(spec.start) || !std::isfinite(spec.stop) || !(spec.start < spec.stop))
    throw Error(ErrorCode::InvalidParameter, "scan range must satisfy start < stop", "range");
  if (spec.solver == ScanSolver::Floquet && spec.floquet_order < 1)
    throw Error(ErrorCode::InvalidParameter, "Floquet order must be >= 1", "order");
  ConfigInput probe = base;
  set_parameter(probe, spec.axis, spec.start);  // UnknownKey for a bad axis
  validate(probe);
  set_parameter(probe, spec.axis, spec.stop);
  validate(probe);
  if (spec.solver == ScanSolver::Floquet && !base.motion.enabled)
    throw Error(ErrorCode::MotionDisabled, "a Floquet scan needs motion enabled", "motion.enabled");
}

/// The configuration solved at grid value `x`.
inline ConfigInput scan_point_input(const ConfigInput& base, const ScanSpec& spec, double x) {
  ConfigInput in = base;
  set_parameter(in, spec.axis, x);
  if (spec.gamma_Q_mode == GammaQMode::Zero) in.atom.gamma_Q_MHz = 0.0;
  return in;
}

/// Solves a single point; errors are recorded in the returned flag.
inline SpectrumPoint solve_scan_point(const ConfigInput& base, const ScanSpec& spec, double x) {
  SpectrumPoint pt;
  pt.axis = x;
  try {
    const auto cfg = validate(scan_point_input(base, spec, x));
    if (spec.solver == ScanSolver::Carrier) {
      const auto l = carrier_superoperator(cfg);
      SteadyResult r = [&] {
        try {
          return steady_state_detailed(l);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::DegenerateKernel || !spec.degenerate_from) throw;
          return stationary_limit(l, pure_state(*spec.degenerate_from));
        }
      }();
      pt.populations = r.rho.populations();
      pt.residual = r.residual;
    } else {
      const auto fs = solve_floquet_steady(cfg, spec.floquet_order, spec.floquet);
      pt.populations = fs.populations();
      pt.residual = fs.residual;
      pt.pairing_error = fs.pairing_error;
      pt.order = fs.order;
    }
    const double sum = pt.populations[0] + pt.populations[1] + pt.populations[2] + pt.populations[3];
    if (std::abs(sum - 1.0) > 1e-8)
      throw Error(ErrorCode::NonPhysicalState, "populations sum to " + std::to_string(sum));
  } catch (const Error& e) {
    pt.flag = std::string(e.name());
    pt.populations.fill(std::numeric_limits<double>::quiet_NaN());
  }
  return pt;
}

inline Spectrum run_scan(const ConfigInput& base, const ScanSpec& spec) {
  validate_scan_spec(base, spec);
  Spectrum s;
  s.spec = spec;
  s.config_hash = config_hash(base);
  s.points = parallel_map(
      spec.points, [&](std::size_t i) { return solve_scan_point(base, spec, spec.value(i)); }, spec.workers);
  return s;
}

// ---------------------------------------------------------------------------

struct Peak {
  double location;  ///< axis units, parabolic interpolation
  double height;
  double fwhm;      ///< full width at half prominence, axis units
  double prominence;
  std::size_t index;
};

/// Local maxima of the population of `level` with prominence >= min_prominence. Widths are
/// measured at half prominence; a peak narrower than 5 grid points raises TooCoarse.
inline std::vector<Peak> find_peaks(const std::vector<double>& x, const std::vector<double>& y, double min_prominence) {
  const std::size_t n = y.size();
  std::vector<Peak> peaks;
  if (n < 3) return peaks;
  auto val = [&](std::size_t i) { return std::isfinite(y[i]) ? y[i] : -std::numeric_limits<double>::infinity(); };
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!std::isfinite(y[i])) continue;
    // first sample of a (possibly flat) top
    if (!(val(i) > val(i - 1))) continue;
    std::size_t j = i;
    while (j + 1 < n && val(j + 1) == val(i)) ++j;
    if (j + 1 >= n || !(val(j + 1) < val(i))) continue;

    double left_min = y[i], right_min = y[i];
    std::size_t l = i;
    while (l > 0 && val(l - 1) <= y[i]) left_min = std::min(left_min, y[--l]);
    std::size_t r = j;
    while (r + 1 < n && val(r + 1) <= y[i]) right_min = std::min(right_min, y[++r]);
    const double prom = y[i] - std::max(left_min, right_min);
    if (!(prom >= min_prominence) || prom <= 0.0) continue;

    Peak p{x[i], y[i], 0.0, prom, i};
    if (i == j) {
      const double y0 = y[i - 1], y1 = y[i], y2 = y[i + 1];
      const double den = y0 - 2.0 * y1 + y2;
      if (den < 0.0) {
        const double off = 0.5 * (y0 - y2) / den;  // in units of the local step
        const double h = off >= 0.0 ? x[i + 1] - x[i] : x[i] - x[i - 1];
        p.location = x[i] + off * h;
        p.height = y1 - 0.25 * (y0 - y2) * off;
      }
    } else {
      p.location = 0.5 * (x[i] + x[j]);
    }
    const double half = y[i] - 0.5 * prom;
    std::size_t a = i;
    while (a > l && y[a] > half) --a;
    double xl = x[a];
    if (y[a] <= half && a < i) xl = x[a] + (half - y[a]) / (y[a + 1] - y[a]) * (x[a + 1] - x[a]);
    std::size_t b = j;
    while (b < r && y[b] > half) ++b;
    double xr = x[b];
    if (y[b] <= half && b > j) xr = x[b - 1] + (y[b - 1] - half) / (y[b - 1] - y[b]) * (x[b] - x[b - 1]);
    p.fwhm = xr - xl;
    const double step = (x.back() - x.front()) / static_cast<double>(n - 1);
    if (p.fwhm < 5.0 * step)
      throw Error(ErrorCode::TooCoarse, "peak at " + std::to_string(p.location) + " is " +
                                            std::to_string(p.fwhm / step) + " grid steps wide (need >= 5)");
    peaks.push_back(p);
    i = j;
  }
  return peaks;
}

inline std::vector<Peak> find_peaks(const Spectrum& s, Level level, double min_prominence) {
  return find_peaks(s.axis(), s.series(level), min_prominence);
}

inline const char* solver_name(ScanSolver s) { return s == ScanSolver::Carrier ? "carrier" : "floquet"; }

inline void write_spectrum_csv(std::ostream& os, const Spectrum& s) {
  os << "axis_MHz,P_S,P_P,P_D,P_Q,residual,flag\n";
  char buf[256];
  for (const auto& p : s.points) {
    const auto& q = p.populations;
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g,%.6g,", p.axis, q[0], q[1], q[2], q[3], p.residual);
    os << buf << p.flag << '\n';
  }
}

inline Json spectrum_to_json(const Spectrum& s) {
  auto num = [](double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); };
  Json meta = build_metadata();
  meta["config_hash"] = s.config_hash;
  meta["solver"] = solver_name(s.spec.solver);
  if (s.spec.solver == ScanSolver::Floquet) meta["floquet_order"] = s.spec.floquet_order;
  meta["axis"] = s.spec.axis;
  meta["start"] = s.spec.start;
  meta["stop"] = s.spec.stop;
  meta["points"] = s.spec.points;
  meta["gamma_Q_mode"] = s.spec.gamma_Q_mode == GammaQMode::Physical ? "physical" : "zero";
  Json rows = Json::array();
  for (const auto& p : s.points) {
    Json row = {{"axis_MHz", p.axis},
                {"P_S", num(p.populations[0])},
                {"P_P", num(p.populations[1])},
                {"P_D", num(p.populations[2])},
                {"P_Q", num(p.populations[3])},
                {"residual", num(p.residual)},
                {"flag", p.flag}};
    if (s.spec.solver == ScanSolver::Floquet) {
      row["pairing_error"] = num(p.pairing_error);
      row["order"] = p.order;
    }
    rows.push_back(std::move(row));
  }
  return {{"metadata", meta}, {"points", rows}};
}

}  // namespace nscheme
