#pragma once

// Stationary Fourier components rho^(n), n in [-N, N], of the master equation for an
// ion oscillating as x(t) = x0 cos(nu t), to first order in the Lamb-Dicke parameters.
//
// Block row n:  (M0 - i n nu) rho^(n) - i[H+, rho^(n-1)] - i[H-, rho^(n+1)] = 0,
// with rho^(+-(N+1)) = 0. One diagonal-element row of block 0 is replaced by Tr rho^(0) = 1.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nscheme/steady.hpp"

namespace nscheme {

inline Eigen::MatrixXcd build_floquet_generator(const SystemConfig& cfg, int order) {
  if (!cfg.motion().enabled)
    throw Error(ErrorCode::MotionDisabled, "the Floquet expansion needs motion enabled", "motion.enabled");
  if (order < 1) throw Error(ErrorCode::InvalidParameter, "Floquet order must be >= 1", "order");
  const auto h = build_hamiltonian(cfg);
  const Mat16 m0 = build_superoperator(h.carrier_total(), cfg).matrix();
  const Mat16 cp = commutator_superoperator(h.h_plus);
  const Mat16 cm = commutator_superoperator(h.h_minus);
  const double nu = cfg.motion().trap_frequency;
  const int k = 2 * order + 1;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(16 * k, 16 * k);
  for (int b = 0; b < k; ++b) {
    const int n = b - order;
    a.block<16, 16>(16 * b, 16 * b) = m0;
    a.block<16, 16>(16 * b, 16 * b).diagonal().array() -= kI * (double(n) * nu);
    if (b > 0) a.block<16, 16>(16 * b, 16 * (b - 1)) = cp;
    if (b + 1 < k) a.block<16, 16>(16 * b, 16 * (b + 1)) = cm;
  }
  return a;
}

struct FloquetBlockSystem {
  int order = 0;
  double nu = 0.0;                 ///< rad/us
  std::vector<Mat4> blocks;        ///< rho^(n) at index n + order
  double residual = 0.0;           ///< max |A x| over all equations of the unbordered system
  double pairing_error = 0.0;      ///< max_n max |rho^(-n) - rho^(n)^dagger|
  std::optional<double> convergence_delta;  ///< max |rho^(0)_N - rho^(0)_{N+1}| when checked

  const Mat4& block(int n) const { return blocks.at(static_cast<std::size_t>(n + order)); }
  /// Time-averaged populations, the diagonal of rho^(0).
  Populations populations() const {
    const Mat4& r = block(0);
    return {r(0, 0).real(), r(1, 1).real(), r(2, 2).real(), r(3, 3).real()};
  }
};

struct FloquetOptions {
  /// Compare with order + 1 and fail when the difference in rho^(0) exceeds `tolerance`.
  bool check_convergence = true;
  /// On failure of the check, raise the order until it passes or max_order is reached.
  bool escalate = true;
  int max_order = 8;
  double tolerance = 1e-8;
  double residual_tolerance = 1e-9;
};

namespace detail {

inline FloquetBlockSystem solve_floquet_once(const SystemConfig& cfg, int order, double residual_tolerance,
                                             bool check_physical = true) {
  const Eigen::MatrixXcd a = build_floquet_generator(cfg, order);
  const Eigen::Index row = 16 * order + vec_index(Level::S, Level::S);
  std::vector<Eigen::Index> diag;
  for (int i = 0; i < 4; ++i) diag.push_back(16 * order + vec_index(i, i));
  double rcond = 0.0;
  const Eigen::VectorXcd x = solve_bordered(a, row, diag, &rcond);
  if (!(rcond > 1e-14))
    throw Error(ErrorCode::DegenerateKernel,
                "Floquet system is singular (reciprocal condition " + std::to_string(rcond) + ")");
  FloquetBlockSystem fs;
  fs.order = order;
  fs.nu = cfg.motion().trap_frequency;
  for (int b = 0; b < 2 * order + 1; ++b) fs.blocks.push_back(unvectorize(Vec16(x.segment<16>(16 * b))));
  fs.residual = (a * x).cwiseAbs().maxCoeff();
  for (int n = 0; n <= order; ++n)
    fs.pairing_error = std::max(fs.pairing_error, max_abs(Mat4(fs.block(-n) - fs.block(n).adjoint())));
  if (!check_physical) return fs;
  if (!(fs.residual < residual_tolerance))
    throw Error(ErrorCode::NoConvergence, "Floquet residual " + std::to_string(fs.residual) + " exceeds tolerance");
  const double tr0 = std::abs(fs.block(0).trace() - 1.0);
  if (tr0 > 1e-10) throw Error(ErrorCode::NonPhysicalState, "Tr rho^(0) differs from 1 by " + std::to_string(tr0));
  const Mat4 r0 = 0.5 * (fs.block(0) + fs.block(0).adjoint());
  const double min_eig = Eigen::SelfAdjointEigenSolver<Mat4>(r0, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  if (min_eig < -1e-8)
    throw Error(ErrorCode::NonPhysicalState, "rho^(0) has eigenvalue " + std::to_string(min_eig));
  return fs;
}

}  // namespace detail

struct ConvergenceCheck {
  double delta;
  bool converged;
};

inline ConvergenceCheck convergence_check(const SystemConfig& cfg, int order, double tolerance = 1e-8) {
  const auto a = detail::solve_floquet_once(cfg, order, 0.0, false);
  const auto b = detail::solve_floquet_once(cfg, order + 1, 0.0, false);
  const double delta = max_abs(Mat4(a.block(0) - b.block(0)));
  return {delta, delta < tolerance};
}

/// Stationary blocks at the requested order, or at the smallest higher order that passes
/// the convergence check when escalation is on.
inline FloquetBlockSystem solve_floquet_steady(const SystemConfig& cfg, int order = 2, const FloquetOptions& opt = {}) {
  auto current = detail::solve_floquet_once(cfg, order, opt.residual_tolerance);
  if (!opt.check_convergence) return current;
  for (int n = order;; ++n) {
    auto next = detail::solve_floquet_once(cfg, n + 1, opt.residual_tolerance);
    const double delta = max_abs(Mat4(current.block(0) - next.block(0)));
    current.convergence_delta = delta;
    if (delta < opt.tolerance) return current;
    if (!opt.escalate || n + 1 >= opt.max_order)
      throw Error(ErrorCode::TruncationNotConverged,
                  "Floquet order " + std::to_string(n) + " differs from order " + std::to_string(n + 1) + " by " +
                      std::to_string(delta) + " in rho^(0)");
    current = std::move(next);
  }
}

inline Json floquet_to_json(const FloquetBlockSystem& fs) {
  Json blocks = Json::object();
  for (int n = -fs.order; n <= fs.order; ++n) blocks[std::to_string(n)] = matrix_to_json(fs.block(n));
  Json j = {{"order", fs.order},
            {"nu_MHz", rad_per_us_to_mhz(fs.nu)},
            {"residual", fs.residual},
            {"pairing_error", fs.pairing_error},
            {"basis", {"S", "P", "D", "Q"}},
            {"blocks", blocks}};
  if (fs.convergence_delta) j["convergence_delta"] = *fs.convergence_delta;
  return j;
}

}  // namespace nscheme
