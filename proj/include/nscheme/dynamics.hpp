#pragma once

// Deterministic time evolution rho(t) = exp(M t) rho0, timescale extraction
// from population traces, and the fluorescence correlation g2(tau).

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "nscheme/liouvillian.hpp"

namespace nscheme {

enum class PropagationMethod { Eigen, Stepwise };

struct PropagatorOptions {
  /// Above this eigenbasis condition number the generator is treated as defective.
  double max_condition = 1e12;
  /// When false a defective generator raises DefectiveGenerator instead of stepping.
  bool allow_fallback = true;
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
};

/// Explicit adaptive Dormand-Prince 5(4) integration of dv/dt = M v, sampled on `times`.
inline std::vector<Eigen::VectorXcd> stepwise_propagate(const Eigen::MatrixXcd& m, const Eigen::VectorXcd& v0,
                                                        std::span<const double> times, double rel_tol = 1e-8,
                                                        double abs_tol = 1e-12) {
  namespace ode = boost::numeric::odeint;
  using State = std::vector<Complex>;
  const auto n = v0.size();
  std::vector<Eigen::VectorXcd> out;
  out.reserve(times.size());
  if (times.empty()) return out;

  State x(v0.data(), v0.data() + n);
  auto rhs = [&m, n](const State& s, State& ds, double) {
    Eigen::Map<const Eigen::VectorXcd> sv(s.data(), n);
    Eigen::Map<Eigen::VectorXcd> dv(ds.data(), n);
    dv.noalias() = m * sv;
  };
  auto record = [&out, n](const State& s, double) {
    out.emplace_back(Eigen::Map<const Eigen::VectorXcd>(s.data(), n));
  };
  const double span = times.back() - times.front();
  const double dt0 = span > 0.0 ? std::min(span, 1e-3 / std::max(max_abs(m), 1e-30)) : 1.0;
  auto stepper = ode::make_dense_output(abs_tol, rel_tol, ode::runge_kutta_dopri5<State>());
  ode::integrate_times(stepper, rhs, x, times.begin(), times.end(), dt0, record);
  return out;
}

/// exp(M t) applied to vectors. Uses the generator's cached eigen-decomposition unless it
/// is ill-conditioned, in which case it integrates stepwise.
class Propagator {
 public:
  explicit Propagator(const Superoperator& l, const PropagatorOptions& opt = {}) : l_(l), opt_(opt) {
    const auto& sd = l_.spectral();
    if (sd.condition > opt_.max_condition || !std::isfinite(sd.condition)) {
      if (!opt_.allow_fallback)
        throw Error(ErrorCode::DefectiveGenerator,
                    "eigenbasis condition number " + std::to_string(sd.condition) + " exceeds limit");
      method_ = PropagationMethod::Stepwise;
    }
  }

  PropagationMethod method() const { return method_; }

  /// exp(M t) v for every t in `times` (non-decreasing, >= 0).
  std::vector<Vec16> propagate(const Vec16& v0, std::span<const double> times) const {
    std::vector<Vec16> out;
    out.reserve(times.size());
    if (method_ == PropagationMethod::Eigen) {
      const auto& sd = l_.spectral();
      const Eigen::VectorXcd c = sd.inverse * v0;
      for (double t : times) {
        Eigen::VectorXcd w = c;
        for (Eigen::Index k = 0; k < w.size(); ++k) w[k] *= std::exp(sd.eigenvalues[k] * t);
        out.emplace_back(sd.vectors * w);
      }
      return out;
    }
    std::vector<double> grid;
    grid.reserve(times.size() + 1);
    const bool prepend = times.empty() || times.front() > 0.0;
    if (prepend) grid.push_back(0.0);
    grid.insert(grid.end(), times.begin(), times.end());
    auto states = stepwise_propagate(l_.matrix(), v0, grid, opt_.rel_tol, opt_.abs_tol);
    for (std::size_t i = prepend ? 1 : 0; i < states.size(); ++i) out.emplace_back(states[i]);
    return out;
  }

  Vec16 propagate(const Vec16& v0, double t) const { return propagate(v0, std::span<const double>(&t, 1)).front(); }

  Mat4 propagate(const Mat4& rho0, double t) const { return unvectorize(propagate(vectorize(rho0), t)); }

 private:
  Superoperator l_;
  PropagatorOptions opt_;
  PropagationMethod method_ = PropagationMethod::Eigen;
};

struct PopulationTrace {
  std::vector<double> times;              ///< us
  std::vector<Populations> populations;   ///< (S, P, D, Q) per sample
  std::vector<Mat4> states;               ///< full rho(t) when requested
  PropagationMethod method = PropagationMethod::Eigen;

  std::vector<double> series(Level l) const {
    std::vector<double> s;
    s.reserve(populations.size());
    for (const auto& p : populations) s.push_back(p[static_cast<std::size_t>(idx(l))]);
    return s;
  }
};

struct EvolveOptions {
  PropagatorOptions propagator;
  bool keep_states = false;
  double trace_tolerance = 1e-8;
  double population_tolerance = 1e-10;
};

inline void check_time_grid(std::span<const double> t) {
  if (t.empty()) throw Error(ErrorCode::InvalidParameter, "empty time grid", "t_grid");
  if (!(t.front() >= 0.0)) throw Error(ErrorCode::InvalidParameter, "time grid must start at t >= 0", "t_grid");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw Error(ErrorCode::InvalidParameter, "time grid must be increasing", "t_grid");
}

inline PopulationTrace evolve(const Superoperator& l, const DensityMatrix& rho0, std::span<const double> t_grid,
                              const EvolveOptions& opt = {}) {
  check_time_grid(t_grid);
  const Propagator prop(l, opt.propagator);
  const auto states = prop.propagate(vectorize(rho0.matrix()), t_grid);
  PopulationTrace tr;
  tr.method = prop.method();
  tr.times.assign(t_grid.begin(), t_grid.end());
  for (std::size_t i = 0; i < states.size(); ++i) {
    const Mat4 rho = unvectorize(states[i]);
    Populations p{rho(0, 0).real(), rho(1, 1).real(), rho(2, 2).real(), rho(3, 3).real()};
    const double sum = p[0] + p[1] + p[2] + p[3];
    if (std::abs(sum - 1.0) > opt.trace_tolerance)
      throw Error(ErrorCode::NonPhysicalState,
                  "trace drifted to " + std::to_string(sum) + " at t = " + std::to_string(t_grid[i]) + " us");
    for (double v : p)
      if (v < -opt.population_tolerance || v > 1.0 + opt.population_tolerance)
        throw Error(ErrorCode::NonPhysicalState,
                    "population " + std::to_string(v) + " out of range at t = " + std::to_string(t_grid[i]) + " us");
    tr.populations.push_back(p);
    if (opt.keep_states) tr.states.push_back(rho);
  }
  return tr;
}

/// n points from t_min to t_max, logarithmically spaced, with t = 0 prepended.
inline std::vector<double> log_time_grid(double t_min, double t_max, std::size_t n) {
  std::vector<double> t{0.0};
  const double a = std::log(t_min), b = std::log(t_max);
  for (std::size_t i = 0; i < n; ++i) t.push_back(std::exp(a + (b - a) * double(i) / double(n - 1)));
  return t;
}

inline std::vector<double> linear_time_grid(double t_max, std::size_t n) {
  std::vector<double> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back(t_max * double(i) / double(n - 1));
  return t;
}

inline void write_trace_csv(std::ostream& os, const PopulationTrace& tr) {
  os << "t_us,P_S,P_P,P_D,P_Q\n";
  char buf[160];
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const auto& p = tr.populations[i];
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g\n", tr.times[i], p[0], p[1], p[2], p[3]);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Timescale extraction

struct Timescales {
  double fast_us;
  double slow_us;
  std::optional<double> rabi_frequency;  ///< rad/us, when an oscillation with contrast > threshold is found
  double oscillation_contrast;           ///< largest swing of P_Q between consecutive turning points
};

struct FitOptions {
  double contrast_threshold = 0.1;
  /// Upper bound on resampled points used for the spectral estimate.
  std::size_t max_spectrum_points = 4096;
};

namespace detail {

/// |dy/dt| at interior points by centered differences.
inline void abs_derivative(std::span<const double> t, std::span<const double> y, std::vector<double>& tt,
                           std::vector<double>& g) {
  tt.clear();
  g.clear();
  for (std::size_t i = 1; i + 1 < t.size(); ++i) {
    tt.push_back(t[i]);
    g.push_back(std::abs((y[i + 1] - y[i - 1]) / (t[i + 1] - t[i - 1])));
  }
}

/// Upper envelope max_{j >= i} g_j, non-increasing, so oscillating decays fit like smooth ones.
inline std::vector<double> suffix_max(const std::vector<double>& g) {
  std::vector<double> e(g.size());
  double m = 0.0;
  for (std::size_t i = g.size(); i-- > 0;) e[i] = m = std::max(m, g[i]);
  return e;
}

/// Indices in [lo, hi) with lower <= e[i] <= upper.
inline std::vector<std::size_t> band(const std::vector<double>& e, std::size_t lo, std::size_t hi, double lower,
                                     double upper) {
  std::vector<std::size_t> out;
  for (std::size_t i = lo; i < hi; ++i)
    if (e[i] >= lower && e[i] <= upper) out.push_back(i);
  return out;
}

/// Decay time from least squares of log g against t; nullopt when the slope is not negative.
inline std::optional<double> log_linear_decay(const std::vector<double>& t, const std::vector<double>& g,
                                              const std::vector<std::size_t>& use) {
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto i : use) {
    if (!(g[i] > 0.0)) continue;
    const double x = t[i], y = std::log(g[i]);
    n += 1;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  if (n < 3) return std::nullopt;
  const double den = n * sxx - sx * sx;
  if (!(den > 0.0)) return std::nullopt;
  const double slope = (n * sxy - sx * sy) / den;
  if (!(slope < 0.0)) return std::nullopt;
  return -1.0 / slope;
}

inline double interpolate(std::span<const double> t, std::span<const double> y, double x) {
  auto it = std::upper_bound(t.begin(), t.end(), x);
  if (it == t.begin()) return y.front();
  if (it == t.end()) return y.back();
  const auto i = static_cast<std::size_t>(it - t.begin());
  const double w = (x - t[i - 1]) / (t[i] - t[i - 1]);
  return y[i - 1] + w * (y[i] - y[i - 1]);
}

}  // namespace detail

/// Frequency (rad per unit of `t`) of the dominant spectral component of a uniformly
/// sampled, mean- and trend-removed signal, searched above `min_cycles` per record.
inline std::optional<double> dominant_frequency(std::span<const double> y, double dt, double min_cycles = 3.0) {
  const std::size_t n = y.size();
  if (n < 16) return std::nullopt;
  // remove linear trend
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < n; ++i) {
    st += double(i);
    sy += y[i];
    stt += double(i) * double(i);
    sty += double(i) * y[i];
  }
  const double slope = (double(n) * sty - st * sy) / (double(n) * stt - st * st);
  const double icpt = (sy - slope * st) / double(n);
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - icpt - slope * double(i);

  auto power = [&](double f) {  // f in cycles per sample
    Complex acc = 0.0;
    const Complex step = std::exp(Complex(0.0, -kTwoPi * f));
    Complex ph = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += r[i] * ph;
      ph *= step;
    }
    return std::norm(acc);
  };
  const double df = 1.0 / double(n);
  std::size_t best = 0;
  double best_p = -1.0;
  const auto k_min = static_cast<std::size_t>(std::ceil(min_cycles));
  for (std::size_t k = k_min; k <= n / 2; ++k) {
    const double p = power(double(k) * df);
    if (p > best_p) {
      best_p = p;
      best = k;
    }
  }
  if (best == 0 || !(best_p > 0.0)) return std::nullopt;
  // golden-section refinement within one bin on either side
  double a = (double(best) - 1.0) * df, b = (double(best) + 1.0) * df;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double pc = power(c), pd = power(d);
  for (int it = 0; it < 60; ++it) {
    if (pc > pd) {
      b = d;
      d = c;
      pd = pc;
      c = b - phi * (b - a);
      pc = power(c);
    } else {
      a = c;
      c = d;
      pc = pd;
      d = a + phi * (b - a);
      pd = power(d);
    }
  }
  return kTwoPi * 0.5 * (a + b) / dt;
}

/// Resamples (t, y) onto a uniform grid over [t0, t1] with at most `max_points` samples.
inline std::vector<double> resample_uniform(std::span<const double> t, std::span<const double> y, double t0,
                                            double t1, std::size_t max_points, double& dt) {
  double h = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i)
    if (t[i] > t0 && t[i - 1] < t1) h = std::max(h, t[i] - t[i - 1]);
  if (!(h > 0.0)) h = (t1 - t0) / double(max_points - 1);
  auto n = static_cast<std::size_t>(std::floor((t1 - t0) / h)) + 1;
  n = std::clamp<std::size_t>(n, 2, max_points);
  dt = (t1 - t0) / double(n - 1);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = detail::interpolate(t, y, t0 + dt * double(i));
  return out;
}

/// Fast scale from the decay of |dP_P/dt|, slow scale from the tail of |dP_Q/dt|
/// (log-linear least squares on the envelope), and the Rabi frequency from the dominant
/// spectral peak of P_Q when it oscillates with sufficient contrast.
inline Timescales fit_timescales(const PopulationTrace& tr, const FitOptions& opt = {}) {
  const auto& t = tr.times;
  if (t.size() < 8) throw Error(ErrorCode::FitFailed, "trace has fewer than 8 samples");
  const auto pP = tr.series(Level::P);
  const auto pQ = tr.series(Level::Q);
  std::vector<double> tt, g;

  // fast: last decade of the initial decay of |dP_P/dt|, where the slowest transient dominates
  detail::abs_derivative(t, pP, tt, g);
  auto e = detail::suffix_max(g);
  const auto gmax_it = std::max_element(g.begin(), g.end());
  if (gmax_it == g.end() || !(*gmax_it > 0.0))
    throw Error(ErrorCode::FitFailed, "P_P is constant; no fast relaxation to fit");
  const auto i0 = static_cast<std::size_t>(gmax_it - g.begin());
  const double gmax = *gmax_it;
  // beyond 50x the time needed to fall two decades the decay belongs to another process
  std::size_t knee = i0;
  while (knee < e.size() && e[knee] > 1e-2 * gmax) ++knee;
  std::size_t i1 = knee;
  if (knee < e.size())
    while (i1 < e.size() && tt[i1] <= 50.0 * tt[knee]) ++i1;
  auto fast = detail::log_linear_decay(tt, e, detail::band(e, i0, i1, 1e-4 * gmax, 1e-3 * gmax));
  if (!fast) fast = detail::log_linear_decay(tt, e, detail::band(e, i0, i1, 1e-4 * gmax, gmax));
  if (!fast) throw Error(ErrorCode::FitFailed, "no exponential approach found in P_P");

  // slow: tail of |dP_Q/dt| beyond the fast transient
  detail::abs_derivative(t, pQ, tt, g);
  e = detail::suffix_max(g);
  const double t_region = std::max(20.0 * *fast, 1e-2 * t.back());
  std::size_t r0 = 0;
  while (r0 < tt.size() && tt[r0] < t_region) ++r0;
  if (tt.size() - r0 < 4) throw Error(ErrorCode::FitFailed, "too few samples after the fast transient");
  const double smax = e[r0];
  if (!(smax > 0.0)) throw Error(ErrorCode::FitFailed, "P_Q is constant; no slow transfer to fit");
  auto slow = detail::log_linear_decay(tt, e, detail::band(e, r0, e.size(), 1e-5 * smax, smax));
  if (!slow) throw Error(ErrorCode::FitFailed, "no exponential approach found in P_Q");
  if (t.back() < 5.0 * *slow)
    throw Error(ErrorCode::FitFailed, "trace ends at " + std::to_string(t.back()) + " us, shorter than 5x the slow scale " +
                                          std::to_string(*slow) + " us");

  Timescales ts{*fast, *slow, std::nullopt, 0.0};

  // oscillation of P_Q over the whole record
  double dt = 0.0;
  const auto y = resample_uniform(t, pQ, t.front(), t.back(), opt.max_spectrum_points, dt);
  std::vector<double> turning;
  for (std::size_t i = 1; i + 1 < y.size(); ++i)
    if ((y[i] - y[i - 1]) * (y[i + 1] - y[i]) < 0.0) turning.push_back(y[i]);
  for (std::size_t i = 1; i < turning.size(); ++i)
    ts.oscillation_contrast = std::max(ts.oscillation_contrast, std::abs(turning[i] - turning[i - 1]));
  if (turning.size() >= 4 && ts.oscillation_contrast > opt.contrast_threshold)
    ts.rabi_frequency = dominant_frequency(y, dt);
  return ts;
}

// ---------------------------------------------------------------------------
// g2(tau)

enum class DetectionChannel { AllP, BlueOnly };

/// Superoperator of the detected jumps: J rho = sum_c L_c rho L_c^dagger.
inline Mat16 detection_superoperator(const SystemConfig& cfg, DetectionChannel ch) {
  Mat16 j = Mat16::Zero();
  for (const auto& c : jump_channels(cfg)) {
    if (c.from != Level::P) continue;
    if (ch == DetectionChannel::BlueOnly && c.to != Level::S) continue;
    j(vec_index(c.to, c.to), vec_index(Level::P, Level::P)) += c.rate;
  }
  return j;
}

inline Complex trace_vec(const Vec16& v) {
  return v[vec_index(0, 0)] + v[vec_index(1, 1)] + v[vec_index(2, 2)] + v[vec_index(3, 3)];
}

/// g2(tau) = Tr[J exp(M tau) J rho_ss] / Tr[J rho_ss]^2.
inline std::vector<double> g2(const Superoperator& l, const SystemConfig& cfg, const DensityMatrix& rho_ss,
                              std::span<const double> tau_grid, DetectionChannel ch = DetectionChannel::AllP,
                              const PropagatorOptions& popt = {}) {
  check_time_grid(tau_grid);
  const Mat16 j = detection_superoperator(cfg, ch);
  const Vec16 jrho = j * vectorize(rho_ss.matrix());
  const double rate = trace_vec(jrho).real();
  // P population below round-off counts as dark
  if (!(rate > 1e-14 * cfg.atom().gamma_P)) throw Error(ErrorCode::ZeroFluorescence, "steady-state fluorescence rate is zero");
  const Vec16 post_jump = jrho / rate;
  const Propagator prop(l, popt);
  std::vector<double> out;
  out.reserve(tau_grid.size());
  for (const auto& v : prop.propagate(post_jump, tau_grid)) out.push_back(trace_vec(Vec16(j * v)).real() / rate);
  return out;
}

}  // namespace nscheme
