#pragma once

// Physical parameter set of the four-level N-scheme (S, P, D, Q driven by the
// B, R and C lasers), its validation, and geometry-derived quantities.
//
// Inputs are expressed the way experimental parameters are usually quoted:
// frequencies in MHz meaning "2pi x value", wavelengths in nm, mass in amu.
// After validation everything is angular frequency in rad/us and time in us.

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "nscheme/core.hpp"

namespace nscheme {

inline constexpr double kAtomicMassUnitKg = 1.66053906660e-27;
/// gamma_Q of the default atom: about one second lifetime of |Q>.
inline constexpr double kDefaultGammaQRadPerUs = 1e-6;

enum class Beam : int { B = 0, R = 1, C = 2 };

constexpr std::string_view beam_name(Beam b) {
  constexpr std::array<std::string_view, 3> names{"laser_B", "laser_R", "laser_C"};
  return names[static_cast<std::size_t>(b)];
}

// ---------------------------------------------------------------------------
// Raw (unvalidated) input, MHz / nm / amu.

struct AtomInput {
  double gamma_P_MHz = 22.0;
  double beta_PS = 15.0 / 16.0;
  double beta_PD = 1.0 / 16.0;
  double gamma_Q_MHz = kDefaultGammaQRadPerUs / kTwoPi;
  double mass_amu = 40.0;
};

struct LaserInput {
  double rabi_MHz = 0.0;
  double detuning_MHz = 0.0;
  double wavelength_nm = 1.0;
  double direction = 1.0;
  double linewidth_hwhm_MHz = 0.0;
};

struct MotionInput {
  bool enabled = false;
  double trap_frequency_MHz = 1.0;
  double amplitude_nm = 0.0;
};

struct ConfigInput {
  AtomInput atom;
  LaserInput laser_B{.wavelength_nm = 397.0};
  LaserInput laser_R{.wavelength_nm = 866.0};
  LaserInput laser_C{.wavelength_nm = 729.0};
  MotionInput motion;

  LaserInput& laser(Beam b) {
    return b == Beam::B ? laser_B : (b == Beam::R ? laser_R : laser_C);
  }
  const LaserInput& laser(Beam b) const {
    return b == Beam::B ? laser_B : (b == Beam::R ? laser_R : laser_C);
  }
};

// ---------------------------------------------------------------------------
// Validated configuration, rad/us.

struct AtomSpec {
  double gamma_P;
  double beta_PS;
  double beta_PD;
  double gamma_Q;
  double mass_kg;
};

struct LaserDrive {
  double rabi;
  double detuning;
  double wavelength_nm;
  int direction;
  double linewidth_hwhm;

  /// Signed wavenumber along the trap axis in rad/nm.
  double wavenumber() const { return direction * kTwoPi / wavelength_nm; }
};

struct MotionSpec {
  double trap_frequency;
  double amplitude_nm;
  bool enabled;
};

class SystemConfig;
SystemConfig validate(const ConfigInput& in);

/// Immutable once built; only `validate` can construct one.
class SystemConfig {
 public:
  const AtomSpec& atom() const { return atom_; }
  const LaserDrive& laser(Beam b) const { return lasers_[static_cast<std::size_t>(b)]; }
  const LaserDrive& laser_B() const { return laser(Beam::B); }
  const LaserDrive& laser_R() const { return laser(Beam::R); }
  const LaserDrive& laser_C() const { return laser(Beam::C); }
  const MotionSpec& motion() const { return motion_; }
  /// The input this configuration was validated from.
  const ConfigInput& input() const { return input_; }

 private:
  friend SystemConfig validate(const ConfigInput& in);
  SystemConfig() = default;

  AtomSpec atom_{};
  std::array<LaserDrive, 3> lasers_{};
  MotionSpec motion_{};
  ConfigInput input_{};
};

namespace detail {

inline void require_finite(double v, const std::string& field) {
  if (!std::isfinite(v)) throw Error(ErrorCode::InvalidParameter, field + " is not finite", field);
}

inline void require_non_negative(double v, const std::string& field) {
  require_finite(v, field);
  if (v < 0.0) throw Error(ErrorCode::NegativeRate, field + " must be >= 0", field);
}

}  // namespace detail

inline SystemConfig validate(const ConfigInput& in) {
  using detail::require_finite;
  using detail::require_non_negative;
  SystemConfig cfg;
  cfg.input_ = in;

  const auto& a = in.atom;
  require_non_negative(a.gamma_P_MHz, "atom.gamma_P");
  if (a.gamma_P_MHz == 0.0)
    throw Error(ErrorCode::NegativeRate, "atom.gamma_P must be > 0", "atom.gamma_P");
  require_non_negative(a.gamma_Q_MHz, "atom.gamma_Q");
  require_finite(a.beta_PS, "atom.beta_PS");
  require_finite(a.beta_PD, "atom.beta_PD");
  if (a.beta_PS < 0.0 || a.beta_PS > 1.0)
    throw Error(ErrorCode::BranchingNotNormalized, "atom.beta_PS outside [0, 1]", "atom.beta_PS");
  if (a.beta_PD < 0.0 || a.beta_PD > 1.0)
    throw Error(ErrorCode::BranchingNotNormalized, "atom.beta_PD outside [0, 1]", "atom.beta_PD");
  if (std::abs(a.beta_PS + a.beta_PD - 1.0) > 1e-12)
    throw Error(ErrorCode::BranchingNotNormalized,
                "atom.beta_PS + atom.beta_PD = " + std::to_string(a.beta_PS + a.beta_PD) + " != 1",
                "atom.beta_PS");
  require_finite(a.mass_amu, "atom.mass");
  if (a.mass_amu <= 0.0) throw Error(ErrorCode::InvalidParameter, "atom.mass must be > 0", "atom.mass");
  cfg.atom_ = AtomSpec{mhz_to_rad_per_us(a.gamma_P_MHz), a.beta_PS, a.beta_PD,
                       mhz_to_rad_per_us(a.gamma_Q_MHz), a.mass_amu * kAtomicMassUnitKg};

  for (Beam b : {Beam::B, Beam::R, Beam::C}) {
    const auto& l = in.laser(b);
    const std::string name(beam_name(b));
    require_non_negative(l.rabi_MHz, name + ".rabi");
    require_finite(l.detuning_MHz, name + ".detuning");
    require_finite(l.wavelength_nm, name + ".wavelength");
    if (l.wavelength_nm <= 0.0)
      throw Error(ErrorCode::InvalidParameter, name + ".wavelength must be > 0", name + ".wavelength");
    if (l.direction != 1.0 && l.direction != -1.0)
      throw Error(ErrorCode::BadDirection, name + ".direction must be +1 or -1", name + ".direction");
    require_non_negative(l.linewidth_hwhm_MHz, name + ".linewidth_hwhm");
    cfg.lasers_[static_cast<std::size_t>(b)] =
        LaserDrive{mhz_to_rad_per_us(l.rabi_MHz), mhz_to_rad_per_us(l.detuning_MHz), l.wavelength_nm,
                   static_cast<int>(l.direction), mhz_to_rad_per_us(l.linewidth_hwhm_MHz)};
  }

  const auto& m = in.motion;
  require_finite(m.trap_frequency_MHz, "motion.trap_frequency");
  require_non_negative(m.amplitude_nm, "motion.amplitude");
  if (m.enabled && m.trap_frequency_MHz <= 0.0)
    throw Error(ErrorCode::NegativeRate, "motion.trap_frequency must be > 0 when motion is enabled",
                "motion.trap_frequency");
  cfg.motion_ = MotionSpec{mhz_to_rad_per_us(m.trap_frequency_MHz), m.amplitude_nm, m.enabled};
  return cfg;
}

// ---------------------------------------------------------------------------

struct ResonanceMismatches {
  double three_photon;  ///< Delta_B - Delta_R - Delta_C
  double two_photon;    ///< Delta_R - Delta_B
  double carrier_C;     ///< Delta_C
};

inline ResonanceMismatches resonance_mismatches(const SystemConfig& cfg) {
  const double dB = cfg.laser_B().detuning, dR = cfg.laser_R().detuning, dC = cfg.laser_C().detuning;
  return {dB - dR - dC, dR - dB, dC};
}

struct LambDickeParameters {
  double eta_B;
  double eta_R;
  double eta_C;
  /// Signed k_R - k_B + k_C in units of |k_B|.
  double delta_k_over_kB;
  /// Signed k_R - k_B + k_C in rad/nm.
  double delta_k;
};

/// eta_j = direction_j * (2pi / lambda_j) * |x0| / 2.
inline LambDickeParameters lamb_dicke_parameters(const SystemConfig& cfg) {
  if (!cfg.motion().enabled)
    throw Error(ErrorCode::MotionDisabled, "Lamb-Dicke parameters need motion enabled", "motion.enabled");
  const double x0 = cfg.motion().amplitude_nm;
  const double kB = cfg.laser_B().wavenumber(), kR = cfg.laser_R().wavenumber(),
               kC = cfg.laser_C().wavenumber();
  const double dk = kR - kB + kC;
  return {kB * x0 / 2.0, kR * x0 / 2.0, kC * x0 / 2.0, dk / std::abs(kB), dk};
}

/// Oscillation amplitude (nm) giving |eta_B| = eta for the configured B wavelength.
inline double amplitude_for_eta_B(const ConfigInput& in, double eta) {
  return 2.0 * eta * in.laser_B.wavelength_nm / kTwoPi;
}

// ---------------------------------------------------------------------------

inline Level parse_level(std::string_view label) {
  for (Level l : kLevels)
    if (level_name(l) == label) return l;
  throw Error(ErrorCode::UnknownLevel, "unknown level '" + std::string(label) + "' (expected S, P, D or Q)",
              std::string(label));
}

/// Checks the density-matrix invariants; returns a description of the first violation.
inline std::optional<std::string> density_matrix_violation(const Mat4& rho, double herm_tol = 1e-12,
                                                           double trace_tol = 1e-10,
                                                           double eig_tol = 1e-10) {
  const double herm = max_abs(rho - rho.adjoint());
  if (herm > herm_tol) return "not Hermitian (deviation " + std::to_string(herm) + ")";
  const double tr_err = std::abs(rho.trace() - 1.0);
  if (tr_err > trace_tol) return "trace differs from 1 by " + std::to_string(tr_err);
  const Mat4 h = 0.5 * (rho + rho.adjoint());
  const double min_eig = Eigen::SelfAdjointEigenSolver<Mat4>(h, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (min_eig < -eig_tol) return "negative eigenvalue " + std::to_string(min_eig);
  return std::nullopt;
}

/// 4x4 Hermitian, unit-trace, positive matrix over (S, P, D, Q).
class DensityMatrix {
 public:
  /// Validates `rho` against the invariants; throws NonPhysicalState otherwise.
  static DensityMatrix checked(const Mat4& rho, double herm_tol = 1e-12, double trace_tol = 1e-10,
                               double eig_tol = 1e-10) {
    if (auto why = density_matrix_violation(rho, herm_tol, trace_tol, eig_tol))
      throw Error(ErrorCode::NonPhysicalState, *why);
    return DensityMatrix(rho);
  }

  const Mat4& matrix() const { return rho_; }
  Complex operator()(Level r, Level c) const { return rho_(idx(r), idx(c)); }
  double population(Level l) const { return rho_(idx(l), idx(l)).real(); }
  Populations populations() const {
    return {rho_(0, 0).real(), rho_(1, 1).real(), rho_(2, 2).real(), rho_(3, 3).real()};
  }

 private:
  explicit DensityMatrix(const Mat4& rho) : rho_(rho) {}
  Mat4 rho_;
};

inline DensityMatrix pure_state(Level l) {
  Mat4 rho = Mat4::Zero();
  rho(idx(l), idx(l)) = 1.0;
  return DensityMatrix::checked(rho);
}

inline DensityMatrix pure_state(std::string_view label) { return pure_state(parse_level(label)); }

/// |psi><psi| for a normalized amplitude vector.
inline DensityMatrix projector(const Vec4& psi) { return DensityMatrix::checked(psi * psi.adjoint(), 1e-12, 1e-9); }

}  // namespace nscheme
