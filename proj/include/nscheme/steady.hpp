#pragma once

// Stationary density matrix: M vec(rho) = 0 with Tr rho = 1.

#include <string>
#include <vector>

#include "nscheme/liouvillian.hpp"

namespace nscheme {

struct SteadyOptions {
  /// Kernel is declared degenerate when sigma_{n-2} < gap_threshold * sigma_0.
  double gap_threshold = 1e-8;
  double residual_tolerance = 1e-10;
  /// Eigenvalues in [-clip_tolerance, 0) are clipped to zero; anything below is an error.
  double clip_tolerance = 1e-10;
};

struct SteadyResult {
  DensityMatrix rho;
  double residual;        ///< max |M vec(rho)| after Hermitization
  double relative_gap;    ///< sigma_{n-2} / sigma_0
};

/// Replaces `row` of `a` by the trace functional over the diagonal entries listed in
/// `diagonal_columns`, solves against the unit vector at `row`, and applies one step of
/// iterative refinement. The LU reciprocal condition estimate is stored in `rcond` if given.
inline Eigen::VectorXcd solve_bordered(const Eigen::MatrixXcd& a, Eigen::Index row,
                                       const std::vector<Eigen::Index>& diagonal_columns, double* rcond = nullptr) {
  Eigen::MatrixXcd bordered = a;
  bordered.row(row).setZero();
  for (auto c : diagonal_columns) bordered(row, c) = 1.0;
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(a.rows());
  rhs(row) = 1.0;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(bordered);
  if (rcond) *rcond = lu.rcond();
  Eigen::VectorXcd x = lu.solve(rhs);
  x += lu.solve(Eigen::VectorXcd(rhs - bordered * x));
  return x;
}

/// Hermitizes and clips tiny negative eigenvalues; throws NonPhysicalState on real negativity.
inline Mat4 physicalize(const Mat4& raw, double clip_tolerance) {
  Mat4 rho = 0.5 * (raw + raw.adjoint());
  rho /= rho.trace().real();
  Eigen::SelfAdjointEigenSolver<Mat4> es(rho);
  const auto& ev = es.eigenvalues();
  if (ev.minCoeff() < -clip_tolerance)
    throw Error(ErrorCode::NonPhysicalState, "stationary state has eigenvalue " + std::to_string(ev.minCoeff()));
  if (ev.minCoeff() < 0.0) {
    Eigen::Vector4d clipped = ev.cwiseMax(0.0);
    clipped /= clipped.sum();
    rho = es.eigenvectors() * clipped.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
  }
  return rho;
}

inline SteadyResult steady_state_detailed(const Superoperator& l, const SteadyOptions& opt = {}) {
  const Mat16& m = l.matrix();
  Eigen::JacobiSVD<Mat16> svd(m);
  const auto& sv = svd.singularValues();
  const double gap = sv(0) > 0.0 ? sv(14) / sv(0) : 0.0;
  if (gap < opt.gap_threshold)
    throw Error(ErrorCode::DegenerateKernel,
                "generator has more than one stationary state (relative singular-value gap " +
                    std::to_string(gap) + ")");

  std::vector<Eigen::Index> diag;
  for (int i = 0; i < 4; ++i) diag.push_back(vec_index(i, i));
  const Eigen::VectorXcd x = solve_bordered(m, vec_index(Level::S, Level::S), diag);
  const Mat4 rho = physicalize(unvectorize(x), opt.clip_tolerance);
  const double residual = max_abs(m * vectorize(rho));
  if (!(residual < opt.residual_tolerance))
    throw Error(ErrorCode::NoConvergence, "stationary residual " + std::to_string(residual) + " exceeds tolerance");
  return {DensityMatrix::checked(rho), residual, gap};
}

inline DensityMatrix steady_state(const Superoperator& l, const SteadyOptions& opt = {}) {
  return steady_state_detailed(l, opt).rho;
}

/// lim_{t->inf} exp(M t) rho0: projection of rho0 onto the kernel along the other
/// eigenmodes. Defined even when the kernel is degenerate (e.g. |Q> decoupled), in
/// which case it selects the stationary state reached from rho0.
inline SteadyResult stationary_limit(const Superoperator& l, const DensityMatrix& rho0, const SteadyOptions& opt = {}) {
  const auto& sd = l.spectral();
  if (sd.condition > 1e12)
    throw Error(ErrorCode::DefectiveGenerator, "eigenbasis too ill-conditioned for a spectral projection");
  const Eigen::VectorXcd c = sd.inverse * vectorize(rho0.matrix());
  Eigen::VectorXcd kept = Eigen::VectorXcd::Zero(c.size());
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    const Complex lam = sd.eigenvalues[k];
    if (lam == Complex(0.0, 0.0)) {
      kept[k] = c[k];
    } else if (lam.real() == 0.0 && std::abs(c[k]) > 1e-10) {
      throw Error(ErrorCode::NoConvergence, "undamped oscillation at " + std::to_string(lam.imag()) +
                                                " rad/us prevents a stationary limit");
    }
  }
  const Mat4 rho = physicalize(unvectorize(Vec16(sd.vectors * kept)), opt.clip_tolerance);
  const double residual = max_abs(l.matrix() * vectorize(rho));
  if (!(residual < opt.residual_tolerance))
    throw Error(ErrorCode::NoConvergence, "stationary residual " + std::to_string(residual) + " exceeds tolerance");
  Eigen::JacobiSVD<Mat16> svd(l.matrix());
  const auto& sv = svd.singularValues();
  return {DensityMatrix::checked(rho), residual, sv(0) > 0.0 ? sv(14) / sv(0) : 0.0};
}

}  // namespace nscheme
