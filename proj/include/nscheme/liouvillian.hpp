#pragma once

// Hamiltonian pieces and the 16x16 generator of the master equation.
//
// Vectorization is column-major: vec(rho)[r + 4c] = rho(r, c), basis order
// (S, P, D, Q). With this convention vec(A rho B) = (B^T kron A) vec(rho).

#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "nscheme/model.hpp"

namespace nscheme {

using Json = nlohmann::json;

struct HamiltonianParts {
  Mat4 h0;         ///< diag(0, -Delta_B, Delta_R - Delta_B, -Delta_C)
  Mat4 h_carrier;  ///< laser couplings at rest
  Mat4 h_plus;     ///< coefficient of exp(+i nu t), first order in eta
  Mat4 h_minus;    ///< coefficient of exp(-i nu t)

  Mat4 carrier_total() const { return h0 + h_carrier; }
};

inline HamiltonianParts build_hamiltonian(const SystemConfig& cfg) {
  const auto& B = cfg.laser_B();
  const auto& R = cfg.laser_R();
  const auto& C = cfg.laser_C();
  constexpr int s = idx(Level::S), p = idx(Level::P), d = idx(Level::D), q = idx(Level::Q);

  HamiltonianParts parts;
  parts.h0 = Mat4::Zero();
  parts.h0(p, p) = -B.detuning;
  parts.h0(d, d) = R.detuning - B.detuning;
  parts.h0(q, q) = -C.detuning;

  auto coupling = [&](Complex kB, Complex kR, Complex kC) {
    Mat4 h = Mat4::Zero();
    h(p, s) = kB * (B.rabi / 2.0);
    h(p, d) = kR * (R.rabi / 2.0);
    h(q, s) = kC * (C.rabi / 2.0);
    return Mat4(h + h.adjoint());
  };
  parts.h_carrier = coupling(1.0, 1.0, 1.0);
  if (cfg.motion().enabled) {
    const auto eta = lamb_dicke_parameters(cfg);
    parts.h_plus = coupling(kI * eta.eta_B, kI * eta.eta_R, kI * eta.eta_C);
  } else {
    parts.h_plus = Mat4::Zero();
  }
  // Both sidebands carry the same operator: exp(i k x0 cos nu t) ~ 1 + i eta (e^{i nu t} + e^{-i nu t}).
  parts.h_minus = parts.h_plus;
  return parts;
}

/// One radiative channel: operator sqrt(rate) |to><from|.
struct JumpChannel {
  std::string name;
  Level from;
  Level to;
  double rate;

  Mat4 op() const {
    Mat4 m = Mat4::Zero();
    m(idx(to), idx(from)) = std::sqrt(rate);
    return m;
  }
};

/// P->S, P->D and Q->S in that order.
inline std::vector<JumpChannel> jump_channels(const SystemConfig& cfg) {
  const auto& a = cfg.atom();
  return {{"P->S", Level::P, Level::S, a.beta_PS * a.gamma_P},
          {"P->D", Level::P, Level::D, a.beta_PD * a.gamma_P},
          {"Q->S", Level::Q, Level::S, a.gamma_Q}};
}

/// Radiative relaxation acting on a 4x4 operator.
inline Mat4 dissipator_action(const SystemConfig& cfg, const Mat4& rho) {
  const auto& a = cfg.atom();
  constexpr int s = idx(Level::S), p = idx(Level::P), d = idx(Level::D), q = idx(Level::Q);
  Mat4 out = Mat4::Zero();
  // -(gamma_P/2)(rho|P><P| + |P><P|rho), likewise for Q
  out.col(p) -= 0.5 * a.gamma_P * rho.col(p);
  out.row(p) -= 0.5 * a.gamma_P * rho.row(p);
  out.col(q) -= 0.5 * a.gamma_Q * rho.col(q);
  out.row(q) -= 0.5 * a.gamma_Q * rho.row(q);
  out(s, s) += a.beta_PS * a.gamma_P * rho(p, p) + a.gamma_Q * rho(q, q);
  out(d, d) += a.beta_PD * a.gamma_P * rho(p, p);
  return out;
}

/// Extra decay rate of the coherence rho(r, c) from independent laser phase diffusion.
inline double dephasing_rate(const SystemConfig& cfg, Level r, Level c) {
  if (r == c) return 0.0;
  const double bB = cfg.laser_B().linewidth_hwhm, bR = cfg.laser_R().linewidth_hwhm,
               bC = cfg.laser_C().linewidth_hwhm;
  // The phase carried by each level in the laser frame: S 0, P phi_B, D phi_B - phi_R, Q phi_C.
  auto key = [](Level x, Level y) { return idx(x) < idx(y) ? std::pair{x, y} : std::pair{y, x}; };
  const auto k = key(r, c);
  if (k == key(Level::P, Level::S)) return bB;
  if (k == key(Level::P, Level::D)) return bR;
  if (k == key(Level::Q, Level::S)) return bC;
  if (k == key(Level::S, Level::D)) return bB + bR;
  if (k == key(Level::Q, Level::P)) return bB + bC;
  return bB + bR + bC;  // Q-D
}

/// Eigen-decomposition of a generator, with the kernel eigenvalue snapped to zero.
struct SpectralDecomposition {
  Eigen::Matrix<Complex, Eigen::Dynamic, 1> eigenvalues;
  Eigen::MatrixXcd vectors;
  Eigen::MatrixXcd inverse;
  double condition = 0.0;  ///< 2-norm condition number of `vectors`
};

/// Diagonalizes a Lindblad-type generator. Eigenvalues with positive real part
/// are clamped onto the imaginary axis and the one closest to zero (plus any within
/// 1e-12 of the matrix scale) is set to exactly zero, so that exp(M t) conserves
/// trace over arbitrarily long times.
inline SpectralDecomposition decompose_generator(const Eigen::MatrixXcd& m) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m);
  if (es.info() != Eigen::Success) throw Error(ErrorCode::NoConvergence, "eigen-decomposition failed");
  SpectralDecomposition sd;
  sd.eigenvalues = es.eigenvalues();
  sd.vectors = es.eigenvectors();
  const double scale = std::max(max_abs(m), 1e-300);
  Eigen::Index k0 = 0;
  sd.eigenvalues.cwiseAbs().minCoeff(&k0);
  for (Eigen::Index k = 0; k < sd.eigenvalues.size(); ++k) {
    auto& lam = sd.eigenvalues[k];
    if (lam.real() > 0.0) lam = Complex(0.0, lam.imag());
    if (k == k0 || std::abs(lam) < 1e-12 * scale) lam = 0.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sd.vectors);
  const auto& sv = svd.singularValues();
  sd.condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  sd.inverse = sd.vectors.fullPivLu().inverse();
  return sd;
}

/// 16x16 generator acting on column-major vectorized density matrices.
/// Immutable; copies share a lazily computed spectral decomposition.
class Superoperator {
 public:
  explicit Superoperator(const Mat16& m) : m_(m), cache_(std::make_shared<Cache>()) {}

  const Mat16& matrix() const { return m_; }

  /// Computed on first use; safe to call from concurrent readers.
  const SpectralDecomposition& spectral() const {
    std::call_once(cache_->once, [this] { cache_->sd = decompose_generator(m_); });
    return cache_->sd;
  }

 private:
  struct Cache {
    std::once_flag once;
    SpectralDecomposition sd;
  };
  Mat16 m_;
  std::shared_ptr<Cache> cache_;
};

inline Vec16 vectorize(const Mat4& rho) { return Eigen::Map<const Vec16>(rho.data()); }
inline Mat4 unvectorize(const Vec16& v) { return Eigen::Map<const Mat4>(v.data()); }

/// -i[h, .] as a 16x16 matrix, built column by column from the basis matrices.
inline Mat16 commutator_superoperator(const Mat4& h) {
  Mat16 m;
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 4; ++r) {
      Mat4 e = Mat4::Zero();
      e(r, c) = 1.0;
      m.col(vec_index(r, c)) = vectorize(Mat4(-kI * (h * e - e * h)));
    }
  return m;
}

/// Generator -i[h, .] + L (+ laser phase diffusion when `dephasing` is set).
inline Superoperator build_superoperator(const Mat4& h, const SystemConfig& cfg, bool dephasing = true) {
  const double herm = max_abs(h - h.adjoint());
  if (herm > 1e-10)
    throw Error(ErrorCode::NotHermitian, "Hamiltonian deviates from Hermitian by " + std::to_string(herm));
  Mat16 m = commutator_superoperator(h);
  for (int c = 0; c < 4; ++c)
    for (int r = 0; r < 4; ++r) {
      Mat4 e = Mat4::Zero();
      e(r, c) = 1.0;
      m.col(vec_index(r, c)) += vectorize(dissipator_action(cfg, e));
    }
  if (dephasing)
    for (Level r : kLevels)
      for (Level c : kLevels) m(vec_index(r, c), vec_index(r, c)) -= dephasing_rate(cfg, r, c);
  return Superoperator(m);
}

/// Generator of the motionless (carrier) problem.
inline Superoperator carrier_superoperator(const SystemConfig& cfg, bool dephasing = true) {
  return build_superoperator(build_hamiltonian(cfg).carrier_total(), cfg, dephasing);
}

/// d rho / dt.
inline Mat4 apply(const Superoperator& l, const Mat4& rho) { return unvectorize(l.matrix() * vectorize(rho)); }

// Debug dumps: row-major lists of [re, im] pairs.

template <typename Derived>
Json matrix_to_json(const Eigen::MatrixBase<Derived>& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json hamiltonian_to_json(const HamiltonianParts& h) {
  return {{"units", "rad/us"},
          {"basis", {"S", "P", "D", "Q"}},
          {"h0", matrix_to_json(h.h0)},
          {"h_carrier", matrix_to_json(h.h_carrier)},
          {"h_plus", matrix_to_json(h.h_plus)},
          {"h_minus", matrix_to_json(h.h_minus)}};
}

inline Json superoperator_to_json(const Superoperator& l) {
  return {{"units", "rad/us"},
          {"vectorization", "column-major, index = row + 4*col, basis S,P,D,Q"},
          {"matrix", matrix_to_json(l.matrix())}};
}

}  // namespace nscheme
