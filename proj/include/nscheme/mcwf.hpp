#pragma once

// Quantum-jump (Monte-Carlo wave-function) trajectories of the carrier problem.
//
// Between jumps the amplitude evolves under H_eff = H - (i/2)(gamma_P |P><P| + gamma_Q |Q><Q|),
// propagated exactly through the eigen-decomposition of the 4x4 H_eff. The next jump
// happens when the squared norm falls to a uniform random threshold; that time is
// bracketed by geometric expansion and refined with TOMS 748.
//
// Per-trajectory seeding: trajectory i of an ensemble with master seed s uses
// std::mt19937_64(splitmix64(s + 0x9E3779B97F4A7C15 * (i + 1))), and uniform
// doubles are (x >> 11) * 2^-53 of successive outputs x.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include <boost/math/tools/roots.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "nscheme/dynamics.hpp"
#include "nscheme/parallel.hpp"
#include "nscheme/steady.hpp"

namespace nscheme {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t trajectory_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master + 0x9E3779B97F4A7C15ull * (index + 1));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct TrajectoryRecord {
  std::uint64_t seed = 0;
  std::vector<double> jump_times;  ///< us, strictly increasing
  std::vector<int> jump_channels;  ///< index into jump_channels(cfg): 0 P->S, 1 P->D, 2 Q->S
  std::vector<double> sample_times;
  std::vector<Vec4> sampled_states;  ///< normalized amplitudes at sample_times

  /// Times of emitted fluorescence photons (decays of |P>).
  std::vector<double> photon_times() const {
    std::vector<double> t;
    for (std::size_t k = 0; k < jump_times.size(); ++k)
      if (jump_channels[k] != 2) t.push_back(jump_times[k]);
    return t;
  }
};

struct TrajectoryOptions {
  /// Times (us, increasing, within [0, t_max]) at which the normalized state is stored.
  std::vector<double> sample_times;
  bool keep_jumps = true;
  /// Absolute accuracy of each jump time.
  double time_tolerance = 1e-6;
};

/// exp(-i H_eff t) for the non-Hermitian effective Hamiltonian, by eigen-decomposition,
/// falling back to the Pade matrix exponential when the eigenbasis is ill-conditioned.
class EffectivePropagator {
 public:
  explicit EffectivePropagator(const Mat4& h_eff) : h_(h_eff) {
    Eigen::ComplexEigenSolver<Mat4> es(h_eff);
    v_ = es.eigenvectors();
    lam_ = es.eigenvalues();
    Eigen::JacobiSVD<Mat4> svd(v_);
    const auto& sv = svd.singularValues();
    eigen_ok_ = es.info() == Eigen::Success && sv(3) > 0.0 && sv(0) / sv(3) < 1e8;
    if (eigen_ok_) {
      vinv_ = v_.inverse();
      gram_ = v_.adjoint() * v_;
    }
  }

  /// Amplitude after time t from psi (not renormalized).
  Vec4 apply(const Vec4& psi, double t) const {
    if (!eigen_ok_) return Mat4((-kI * t * h_).exp()) * psi;
    Vec4 c = vinv_ * psi;
    for (int k = 0; k < 4; ++k) c[k] *= std::exp(-kI * lam_[k] * t);
    return v_ * c;
  }

  /// Squared norm after time t, given c = V^-1 psi.
  double norm2(const Vec4& c, double t) const {
    Vec4 d;
    for (int k = 0; k < 4; ++k) d[k] = c[k] * std::exp(-kI * lam_[k] * t);
    return (d.adjoint() * gram_ * d)(0, 0).real();
  }

  bool eigen_ok() const { return eigen_ok_; }
  Vec4 coefficients(const Vec4& psi) const { return vinv_ * psi; }

 private:
  Mat4 h_;
  Mat4 v_, vinv_, gram_;
  Vec4 lam_;
  bool eigen_ok_ = false;
};

inline Mat4 effective_hamiltonian(const SystemConfig& cfg) {
  Mat4 h = build_hamiltonian(cfg).carrier_total();
  h(idx(Level::P), idx(Level::P)) -= 0.5 * kI * cfg.atom().gamma_P;
  h(idx(Level::Q), idx(Level::Q)) -= 0.5 * kI * cfg.atom().gamma_Q;
  return h;
}

inline void require_trajectory_config(const SystemConfig& cfg) {
  if (cfg.motion().enabled)
    throw Error(ErrorCode::InvalidParameter, "trajectories are carrier-only; disable motion", "motion.enabled");
  for (Beam b : {Beam::B, Beam::R, Beam::C})
    if (cfg.laser(b).linewidth_hwhm != 0.0)
      throw Error(ErrorCode::InvalidParameter, "trajectories do not model laser linewidth",
                  std::string(beam_name(b)) + ".linewidth_hwhm");
}

inline TrajectoryRecord run_trajectory(const SystemConfig& cfg, const Vec4& psi0, double t_max, std::uint64_t seed,
                                       const TrajectoryOptions& opt = {}) {
  require_trajectory_config(cfg);
  if (std::abs(psi0.norm() - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidParameter, "initial amplitude is not normalized", "psi0");
  if (!(t_max >= 0.0) || !std::isfinite(t_max)) throw Error(ErrorCode::InvalidParameter, "t_max must be >= 0", "t_max");

  const auto channels = jump_channels(cfg);
  const EffectivePropagator prop(effective_hamiltonian(cfg));
  std::mt19937_64 rng(seed);

  TrajectoryRecord rec;
  rec.seed = seed;
  rec.sample_times = opt.sample_times;
  rec.sampled_states.reserve(opt.sample_times.size());
  std::size_t next_sample = 0;

  auto record_samples = [&](const Vec4& psi, double t0, double t1, bool inclusive) {
    while (next_sample < opt.sample_times.size()) {
      const double s = opt.sample_times[next_sample];
      if (s > t1 || (!inclusive && s == t1)) break;
      const Vec4 a = prop.apply(psi, s - t0);
      rec.sampled_states.push_back(a / a.norm());
      ++next_sample;
    }
  };

  Vec4 psi = psi0;
  double t = 0.0;
  double step_guess = 1.0 / std::max({cfg.atom().gamma_P, cfg.atom().gamma_Q, 1e-30});
  while (true) {
    const double remaining = t_max - t;
    const double r = 1.0 - uniform01(rng);  // (0, 1]
    const Vec4 c = prop.eigen_ok() ? prop.coefficients(psi) : Vec4::Zero();
    auto norm2 = [&](double tau) {
      return prop.eigen_ok() ? prop.norm2(c, tau) : prop.apply(psi, tau).squaredNorm();
    };
    if (norm2(remaining) > r) {
      record_samples(psi, t, t_max, true);
      break;
    }
    // bracket the threshold crossing, then refine
    double lo = 0.0, hi = std::min(step_guess, remaining);
    while (norm2(hi) > r) {
      lo = hi;
      hi = std::min(2.0 * hi, remaining);
    }
    double tau = hi;
    if (hi - lo > opt.time_tolerance) {
      std::uintmax_t iters = 200;
      const double tol = opt.time_tolerance;
      auto done = [tol](double a, double b) { return std::abs(b - a) <= tol; };
      const auto root = boost::math::tools::toms748_solve([&](double x) { return norm2(x) - r; }, lo, hi,
                                                           norm2(lo) - r, norm2(hi) - r, done, iters);
      tau = 0.5 * (root.first + root.second);
    }
    step_guess = std::max(tau, 1e-9);
    tau = std::max(tau, std::nextafter(0.0, 1.0));

    record_samples(psi, t, t + tau, false);
    const Vec4 a = prop.apply(psi, tau);
    t += tau;

    std::array<double, 3> w{};
    double total = 0.0;
    for (std::size_t k = 0; k < channels.size(); ++k) {
      w[k] = channels[k].rate * std::norm(a[idx(channels[k].from)]);
      total += w[k];
    }
    if (!(total > 0.0)) {
      // threshold hit through numerical decay of an unpopulated level; nothing can jump
      record_samples(a / a.norm(), t, t_max, true);
      break;
    }
    const double u = uniform01(rng) * total;
    std::size_t ch = 0;
    for (double acc = w[0]; ch + 1 < channels.size() && u >= acc; acc += w[++ch]) {
    }
    psi = Vec4::Zero();
    psi[idx(channels[ch].to)] = 1.0;  // |to><from| a, normalized, up to a global phase
    if (opt.keep_jumps) {
      rec.jump_times.push_back(t);
      rec.jump_channels.push_back(static_cast<int>(ch));
    }
  }
  return rec;
}

inline TrajectoryRecord run_trajectory(const SystemConfig& cfg, Level start, double t_max, std::uint64_t seed,
                                       const TrajectoryOptions& opt = {}) {
  Vec4 psi = Vec4::Zero();
  psi[idx(start)] = 1.0;
  return run_trajectory(cfg, psi, t_max, seed, opt);
}

struct EnsembleTrace {
  PopulationTrace mean;
  std::vector<Populations> standard_error;
  std::size_t n_traj = 0;
};

/// Ensemble average of level projectors over n_traj trajectories (trajectory i seeded
/// with trajectory_seed(seed, i)); standard errors are sample std / sqrt(n), zero for n = 1.
inline EnsembleTrace ensemble_populations(const SystemConfig& cfg, const Vec4& psi0, std::span<const double> t_grid,
                                          std::size_t n_traj, std::uint64_t seed, unsigned workers = 0) {
  check_time_grid(t_grid);
  if (n_traj < 1) throw Error(ErrorCode::InvalidParameter, "n_traj must be >= 1", "n_traj");
  TrajectoryOptions opt;
  opt.sample_times.assign(t_grid.begin(), t_grid.end());
  opt.keep_jumps = false;
  const double t_max = t_grid.back();

  auto pops = parallel_map(
      n_traj,
      [&](std::size_t i) {
        const auto rec = run_trajectory(cfg, psi0, t_max, trajectory_seed(seed, i), opt);
        std::vector<Populations> p(rec.sampled_states.size());
        for (std::size_t k = 0; k < p.size(); ++k)
          for (int l = 0; l < 4; ++l) p[k][l] = std::norm(rec.sampled_states[k][l]);
        return p;
      },
      workers);

  EnsembleTrace out;
  out.n_traj = n_traj;
  out.mean.times.assign(t_grid.begin(), t_grid.end());
  const std::size_t m = t_grid.size();
  out.mean.populations.assign(m, Populations{});
  out.standard_error.assign(m, Populations{});
  const double n = static_cast<double>(n_traj);
  for (std::size_t k = 0; k < m; ++k)
    for (int l = 0; l < 4; ++l) {
      double s = 0.0, s2 = 0.0;
      for (const auto& p : pops) {
        s += p[k][l];
        s2 += p[k][l] * p[k][l];
      }
      const double mu = s / n;
      out.mean.populations[k][l] = mu;
      out.standard_error[k][l] = n_traj > 1 ? std::sqrt(std::max(0.0, (s2 - n * mu * mu) / (n - 1.0)) / n) : 0.0;
    }
  return out;
}

/// Runs n_traj trajectories in parallel, keeping the jump records.
inline std::vector<TrajectoryRecord> run_trajectories(const SystemConfig& cfg, const Vec4& psi0, double t_max,
                                                      std::size_t n_traj, std::uint64_t seed, unsigned workers = 0) {
  return parallel_map(
      n_traj, [&](std::size_t i) { return run_trajectory(cfg, psi0, t_max, trajectory_seed(seed, i)); }, workers);
}

// ---------------------------------------------------------------------------
// Bright and dark periods

struct BrightDarkStatistics {
  double dark_threshold_us = 0.0;
  std::size_t photons = 0;
  std::size_t bright_periods = 0;
  std::size_t dark_periods = 0;
  double mean_bright_photons = 0.0;
  double stderr_bright_photons = 0.0;
  std::optional<double> mean_dark_duration_us;
  std::optional<double> stderr_dark_duration_us;
};

namespace detail {

inline std::pair<double, double> mean_and_stderr(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += x;
  const double mu = s / n;
  if (v.size() < 2) return {mu, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return {mu, std::sqrt(ss / (n - 1.0) / n)};
}

}  // namespace detail

/// Splits each photon record at gaps longer than dark_threshold_us. Every run of
/// photons is a bright period; every splitting gap is a dark period.
inline BrightDarkStatistics bright_dark_statistics(std::span<const std::vector<double>> photon_records,
                                                   double dark_threshold_us) {
  if (!(dark_threshold_us > 0.0))
    throw Error(ErrorCode::InvalidParameter, "dark threshold must be > 0", "dark_threshold");
  BrightDarkStatistics st;
  st.dark_threshold_us = dark_threshold_us;
  std::vector<double> bright, dark;
  for (const auto& rec : photon_records) {
    if (rec.empty()) continue;
    st.photons += rec.size();
    double run = 1.0;
    for (std::size_t k = 1; k < rec.size(); ++k) {
      const double gap = rec[k] - rec[k - 1];
      if (gap > dark_threshold_us) {
        bright.push_back(run);
        dark.push_back(gap);
        run = 1.0;
      } else {
        run += 1.0;
      }
    }
    bright.push_back(run);
  }
  if (st.photons == 0) throw Error(ErrorCode::NoJumps, "no photons in any record");
  st.bright_periods = bright.size();
  st.dark_periods = dark.size();
  std::tie(st.mean_bright_photons, st.stderr_bright_photons) = detail::mean_and_stderr(bright);
  if (!dark.empty()) {
    const auto [mu, se] = detail::mean_and_stderr(dark);
    st.mean_dark_duration_us = mu;
    st.stderr_dark_duration_us = se;
  }
  return st;
}

inline BrightDarkStatistics bright_dark_statistics(std::span<const TrajectoryRecord> records,
                                                   double dark_threshold_us) {
  if (records.empty()) throw Error(ErrorCode::NoJumps, "no trajectory records");
  std::vector<std::vector<double>> photons;
  photons.reserve(records.size());
  for (const auto& r : records) photons.push_back(r.photon_times());
  return bright_dark_statistics(std::span<const std::vector<double>>(photons), dark_threshold_us);
}

/// Mean time between photons while the atom is in the fluorescing Lambda subsystem,
/// taken from the steady state with the C laser switched off.
inline double bright_photon_interval(const SystemConfig& cfg) {
  ConfigInput in = cfg.input();
  in.laser_C.rabi_MHz = 0.0;
  in.motion.enabled = false;
  for (Beam b : {Beam::B, Beam::R, Beam::C}) in.laser(b).linewidth_hwhm_MHz = 0.0;
  const auto lam = validate(in);
  const auto rho = stationary_limit(carrier_superoperator(lam), pure_state(Level::S)).rho;
  const double rate = lam.atom().gamma_P * rho.population(Level::P);
  if (!(rate > 1e-30)) throw Error(ErrorCode::ZeroFluorescence, "the Lambda subsystem does not fluoresce");
  return 1.0 / rate;
}

inline double default_dark_threshold(const SystemConfig& cfg) { return 100.0 * bright_photon_interval(cfg); }

inline void write_photon_csv(std::ostream& os, std::span<const TrajectoryRecord> records, const SystemConfig& cfg) {
  const auto channels = jump_channels(cfg);
  os << "trajectory_id,jump_time_us,channel\n";
  char buf[96];
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t k = 0; k < records[i].jump_times.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%zu,%.12g,", i, records[i].jump_times[k]);
      os << buf << channels[static_cast<std::size_t>(records[i].jump_channels[k])].name << '\n';
    }
}

inline Json statistics_to_json(const BrightDarkStatistics& st) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return {{"dark_threshold_us", st.dark_threshold_us},
          {"photons", st.photons},
          {"bright_periods", st.bright_periods},
          {"dark_periods", st.dark_periods},
          {"mean_bright_photons", st.mean_bright_photons},
          {"stderr_bright_photons", st.stderr_bright_photons},
          {"mean_dark_duration_us", opt(st.mean_dark_duration_us)},
          {"stderr_dark_duration_us", opt(st.stderr_dark_duration_us)}};
}

}  // namespace nscheme
