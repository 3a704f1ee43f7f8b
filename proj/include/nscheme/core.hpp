#pragma once

// Shared numeric types, level labels and the error type used by every module.

#include <array>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace nscheme {

using Complex = std::complex<double>;
using Mat4 = Eigen::Matrix<Complex, 4, 4>;
using Vec4 = Eigen::Matrix<Complex, 4, 1>;
using Mat16 = Eigen::Matrix<Complex, 16, 16>;
using Vec16 = Eigen::Matrix<Complex, 16, 1>;
using Populations = std::array<double, 4>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

/// Internal levels in basis order. Values index 4x4 matrices directly.
enum class Level : int { S = 0, P = 1, D = 2, Q = 3 };

inline constexpr std::array<Level, 4> kLevels{Level::S, Level::P, Level::D, Level::Q};

constexpr int idx(Level l) { return static_cast<int>(l); }

constexpr std::string_view level_name(Level l) {
  constexpr std::array<std::string_view, 4> names{"S", "P", "D", "Q"};
  return names[static_cast<std::size_t>(l)];
}

/// Index of the (row, col) element of a 4x4 matrix in its column-major vectorization.
constexpr int vec_index(int row, int col) { return row + 4 * col; }
constexpr int vec_index(Level row, Level col) { return vec_index(idx(row), idx(col)); }

/// Frequencies enter in MHz as the "2pi x" values; internally they are rad/us.
constexpr double mhz_to_rad_per_us(double mhz) { return kTwoPi * mhz; }
constexpr double rad_per_us_to_mhz(double w) { return w / kTwoPi; }

enum class ErrorCode {
  NegativeRate,
  BranchingNotNormalized,
  BadDirection,
  InvalidParameter,
  UnknownLevel,
  UnknownKey,
  MotionDisabled,
  NotHermitian,
  DegenerateKernel,
  NoConvergence,
  NonPhysicalState,
  DefectiveGenerator,
  FitFailed,
  ZeroFluorescence,
  NoJumps,
  ZeroDetuningC,
  ZeroCoupling,
  TruncationNotConverged,
  TooCoarse,
  Io,
};

constexpr std::string_view error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NegativeRate: return "NegativeRate";
    case ErrorCode::BranchingNotNormalized: return "BranchingNotNormalized";
    case ErrorCode::BadDirection: return "BadDirection";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::UnknownLevel: return "UnknownLevel";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::MotionDisabled: return "MotionDisabled";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::DegenerateKernel: return "DegenerateKernel";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NonPhysicalState: return "NonPhysicalState";
    case ErrorCode::DefectiveGenerator: return "DefectiveGenerator";
    case ErrorCode::FitFailed: return "FitFailed";
    case ErrorCode::ZeroFluorescence: return "ZeroFluorescence";
    case ErrorCode::NoJumps: return "NoJumps";
    case ErrorCode::ZeroDetuningC: return "ZeroDetuningC";
    case ErrorCode::ZeroCoupling: return "ZeroCoupling";
    case ErrorCode::TruncationNotConverged: return "TruncationNotConverged";
    case ErrorCode::TooCoarse: return "TooCoarse";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Validation errors reject input; everything else is a solver failure.
constexpr bool is_validation_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::NegativeRate:
    case ErrorCode::BranchingNotNormalized:
    case ErrorCode::BadDirection:
    case ErrorCode::InvalidParameter:
    case ErrorCode::UnknownLevel:
    case ErrorCode::UnknownKey:
    case ErrorCode::MotionDisabled:
    case ErrorCode::Io:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::string field = {})
      : std::runtime_error(std::string(error_name(code)) + ": " + what),
        code_(code),
        field_(std::move(field)) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }
  /// Offending parameter path, empty when not applicable.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

/// Largest elementwise modulus; the norm used by every tolerance in this library.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace nscheme
