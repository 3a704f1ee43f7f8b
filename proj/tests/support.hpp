#pragma once

#include <optional>
#include <random>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "nscheme/nscheme.hpp"

namespace testing_support {

using namespace nscheme;

inline ConfigInput three_photon_input() {
  ConfigInput in;
  in.laser_B.rabi_MHz = 10.0;
  in.laser_B.detuning_MHz = 8.0;
  in.laser_R.rabi_MHz = 2.5;
  in.laser_R.detuning_MHz = 3.0;
  in.laser_C.rabi_MHz = 0.05;
  in.laser_C.detuning_MHz = 5.0;
  return in;
}

inline ConfigInput two_plus_one_input() {
  ConfigInput in = three_photon_input();
  in.laser_R.detuning_MHz = 8.0;
  in.laser_C.detuning_MHz = 0.0;
  return in;
}

inline ConfigInput moving_input(double direction_B, double eta_B = 0.1) {
  ConfigInput in = three_photon_input();
  in.laser_B.direction = direction_B;
  in.motion.enabled = true;
  in.motion.trap_frequency_MHz = 1.0;
  in.motion.amplitude_nm = amplitude_for_eta_B(in, eta_B);
  return in;
}

inline std::string config_path(const std::string& name) { return std::string(NSCHEME_CONFIG_DIR) + "/" + name; }

/// Lindblad generator assembled from Kronecker products: vec(A X B) = (B^T (x) A) vec(X).
inline Eigen::MatrixXcd kronecker_generator(const Mat4& h, const SystemConfig& cfg) {
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(4, 4);
  Eigen::MatrixXcd m = -kI * (Eigen::kroneckerProduct(id, h) - Eigen::kroneckerProduct(h.transpose(), id)).eval();
  auto add = [&](const Mat4& l) {
    const Mat4 ll = l.adjoint() * l;
    m += Eigen::kroneckerProduct(l.conjugate(), l).eval();
    m -= 0.5 * Eigen::kroneckerProduct(id, ll).eval();
    m -= 0.5 * Eigen::kroneckerProduct(ll.transpose(), id).eval();
  };
  for (const auto& ch : jump_channels(cfg)) add(ch.op());
  // laser phase diffusion: the phase each level carries, S 0, P phi_B, D phi_B - phi_R, Q phi_C
  const double charge[3][4] = {{0, 1, 1, 0}, {0, 0, -1, 0}, {0, 0, 0, 1}};
  const double hwhm[3] = {cfg.laser_B().linewidth_hwhm, cfg.laser_R().linewidth_hwhm, cfg.laser_C().linewidth_hwhm};
  for (int j = 0; j < 3; ++j) {
    Mat4 a = Mat4::Zero();
    for (int k = 0; k < 4; ++k) a(k, k) = std::sqrt(2.0 * hwhm[j]) * charge[j][k];
    add(a);
  }
  return m;
}

/// exp(M t) vec(rho0) by scaling and squaring.
inline Mat4 exact_evolution(const Mat16& m, const Mat4& rho0, double t) {
  const Eigen::MatrixXcd e = (Eigen::MatrixXcd(m) * t).exp();
  return unvectorize(Vec16(e * vectorize(rho0)));
}

/// Code of the nscheme::Error thrown by f, or nullopt if it returns normally.
template <class F>
std::optional<ErrorCode> error_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline ConfigInput random_input(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(std::log(0.01), std::log(30.0));
  std::uniform_int_distribution<int> sign(0, 1);
  auto f = [&] { return std::exp(u(rng)); };
  auto sf = [&] { return (sign(rng) ? 1.0 : -1.0) * f(); };
  ConfigInput in;
  in.laser_B.rabi_MHz = f();
  in.laser_R.rabi_MHz = f();
  in.laser_C.rabi_MHz = f();
  in.laser_B.detuning_MHz = sf();
  in.laser_R.detuning_MHz = sf();
  in.laser_C.detuning_MHz = sf();
  return in;
}

inline Mat4 random_matrix(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = Complex(n(rng), n(rng));
  return m;
}

}  // namespace testing_support
