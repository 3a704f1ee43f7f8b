#pragma once

// Closed-form dressed-state quantities: the perturbative three-photon trapping state,
// the eigensystem of the Lambda subsystem, and the three-photon Doppler coupling rate.

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "nscheme/model.hpp"

namespace nscheme {

struct PerturbativeReport {
  double alpha_C;            ///< Omega_C / (2 Delta_C)
  double epsilon;            ///< (Omega_B / Omega_R) alpha_C
  double P_Q, P_D, P_S;      ///< occupations of the trapping state, exact normalization
  double shift_SQ;           ///< rad/us, alpha_C Omega_C / 2
  double shift_QS;           ///< rad/us, -Delta_C - alpha_C Omega_C / 2
  double q_linewidth_scale;  ///< (alpha_C^2 Omega_B / Omega_R)^2
  double three_photon_mismatch;  ///< rad/us
  std::vector<std::string> warnings;

  /// 1 / (1 + alpha_C^2 + epsilon^2), equal to P_Q up to fourth order.
  double P_Q_expanded() const { return 1.0 / (1.0 + alpha_C * alpha_C + epsilon * epsilon); }
};

/// Requires Delta_C != 0 and Omega_R > 0. Off three-photon resonance, or with
/// |alpha_C| >= 0.1, the report is still produced and carries a warning.
inline PerturbativeReport three_photon_report(const SystemConfig& cfg) {
  const auto& B = cfg.laser_B();
  const auto& R = cfg.laser_R();
  const auto& C = cfg.laser_C();
  if (C.detuning == 0.0)
    throw Error(ErrorCode::ZeroDetuningC, "the perturbative trapping state needs laser_C.detuning != 0",
                "laser_C.detuning");
  if (R.rabi == 0.0) throw Error(ErrorCode::ZeroCoupling, "epsilon needs laser_R.rabi > 0", "laser_R.rabi");

  PerturbativeReport r{};
  r.alpha_C = C.rabi / (2.0 * C.detuning);
  r.epsilon = (B.rabi / R.rabi) * r.alpha_C;
  const double a2 = r.alpha_C * r.alpha_C, e2 = r.epsilon * r.epsilon;
  // |Psi_NC> = N' (eps |D> + N (|Q> - alpha |S>)), N = (1 + a2)^-1/2, N' = (1 + e2)^-1/2
  r.P_Q = 1.0 / ((1.0 + e2) * (1.0 + a2));
  r.P_D = e2 / (1.0 + e2);
  r.P_S = a2 / ((1.0 + e2) * (1.0 + a2));
  r.shift_SQ = r.alpha_C * C.rabi / 2.0;
  r.shift_QS = -C.detuning - r.alpha_C * C.rabi / 2.0;
  const double s = a2 * B.rabi / R.rabi;
  r.q_linewidth_scale = s * s;
  r.three_photon_mismatch = resonance_mismatches(cfg).three_photon;

  if (std::abs(r.alpha_C) >= 0.1)
    r.warnings.push_back("PerturbationInvalid: |alpha_C| = " + std::to_string(std::abs(r.alpha_C)) + " >= 0.1");
  const double scale = std::max({std::abs(B.detuning), std::abs(R.detuning), std::abs(C.detuning), 1e-300});
  if (std::abs(r.three_photon_mismatch) > 1e-12 * scale)
    r.warnings.push_back("three-photon mismatch " + std::to_string(rad_per_us_to_mhz(r.three_photon_mismatch)) +
                         " MHz is not zero");
  return r;
}

struct LambdaEigensystem {
  double omega_bar;       ///< rad/us, sqrt(Omega_B^2 + Omega_R^2)
  double theta;           ///< rad, in [0, pi/2)
  double omega_plus;      ///< rad/us
  double omega_minus;     ///< rad/us
  double omega_D = 0.0;   ///< rad/us
  double effective_rabi;  ///< rad/us, Omega_C Omega_R / omega_bar
  Eigen::Vector3d dark_state;    ///< amplitudes over (S, P, D)
  Eigen::Vector3d bright_plus;
  Eigen::Vector3d bright_minus;
  Eigen::Matrix3d hamiltonian;   ///< the Lambda Hamiltonian at Delta_R = Delta_B these vectors diagonalize
};

/// Eigensystem of the {S, P, D} subsystem at two-photon resonance (Delta_R taken equal to Delta_B).
inline LambdaEigensystem lambda_eigensystem(const SystemConfig& cfg) {
  const double wB = cfg.laser_B().rabi, wR = cfg.laser_R().rabi, dB = cfg.laser_B().detuning;
  const double wbar = std::hypot(wB, wR);
  if (!(wbar > 0.0)) throw Error(ErrorCode::ZeroCoupling, "Lambda eigensystem needs Omega_B or Omega_R > 0",
                                 "laser_B.rabi");
  const double root = std::sqrt(dB * dB + wbar * wbar);
  LambdaEigensystem e{};
  e.omega_bar = wbar;
  e.theta = std::atan((dB + root) / wbar);
  e.omega_plus = -0.5 * (dB - root);
  e.omega_minus = -0.5 * (dB + root);
  e.effective_rabi = cfg.laser_C().rabi * wR / wbar;
  const double c = std::cos(e.theta), s = std::sin(e.theta);
  e.dark_state << wR / wbar, 0.0, -wB / wbar;
  e.bright_plus << s * wB / wbar, c, s * wR / wbar;
  e.bright_minus << c * wB / wbar, -s, c * wR / wbar;
  e.hamiltonian << 0.0, wB / 2.0, 0.0,
                   wB / 2.0, -dB, wR / 2.0,
                   0.0, wR / 2.0, 0.0;
  return e;
}

/// Signed k_R - k_B + k_C along the trap axis in rad/m; independent of the motion settings.
inline double wavevector_mismatch_per_m(const SystemConfig& cfg) {
  return (cfg.laser_R().wavenumber() - cfg.laser_B().wavenumber() + cfg.laser_C().wavenumber()) * 1e9;
}

/// R = epsilon * v * Delta k in rad/us, for ion velocity v in m/s.
inline double doppler_rate(const SystemConfig& cfg, double velocity_m_per_s) {
  if (!std::isfinite(velocity_m_per_s))
    throw Error(ErrorCode::InvalidParameter, "velocity is not finite", "velocity");
  const auto rep = three_photon_report(cfg);
  return rep.epsilon * velocity_m_per_s * wavevector_mismatch_per_m(cfg) * 1e-6;
}

inline nlohmann::json report_to_json(const PerturbativeReport& r) {
  return {{"alpha_C", r.alpha_C},
          {"epsilon", r.epsilon},
          {"populations_NC", {{"P_Q", r.P_Q}, {"P_D", r.P_D}, {"P_S", r.P_S}}},
          {"P_Q_expanded", r.P_Q_expanded()},
          {"shift_SQ_MHz", rad_per_us_to_mhz(r.shift_SQ)},
          {"shift_QS_MHz", rad_per_us_to_mhz(r.shift_QS)},
          {"q_linewidth_scale", r.q_linewidth_scale},
          {"three_photon_mismatch_MHz", rad_per_us_to_mhz(r.three_photon_mismatch)},
          {"warnings", r.warnings}};
}

inline nlohmann::json eigensystem_to_json(const LambdaEigensystem& e) {
  auto vec = [](const Eigen::Vector3d& v) { return nlohmann::json{v[0], v[1], v[2]}; };
  return {{"omega_bar_MHz", rad_per_us_to_mhz(e.omega_bar)},
          {"theta_rad", e.theta},
          {"omega_plus_MHz", rad_per_us_to_mhz(e.omega_plus)},
          {"omega_minus_MHz", rad_per_us_to_mhz(e.omega_minus)},
          {"omega_D_MHz", 0.0},
          {"effective_rabi_MHz", rad_per_us_to_mhz(e.effective_rabi)},
          {"basis", {"S", "P", "D"}},
          {"dark_state", vec(e.dark_state)},
          {"bright_plus", vec(e.bright_plus)},
          {"bright_minus", vec(e.bright_minus)}};
}

}  // namespace nscheme
