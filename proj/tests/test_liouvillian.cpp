#include "catch_amalgamated.hpp"
#include "support.hpp"

using namespace nscheme;
using namespace testing_support;
using Catch::Matchers::WithinAbs;

TEST_CASE("Hamiltonian in the rotating frame", "[liouvillian]") {
  const auto cfg = validate(three_photon_input());
  const auto h = build_hamiltonian(cfg);
  const double w = 2.0 * std::numbers::pi;
  CHECK_THAT(h.h0(1, 1).real(), WithinAbs(-8.0 * w, 1e-12));
  CHECK_THAT(h.h0(2, 2).real(), WithinAbs((3.0 - 8.0) * w, 1e-12));
  CHECK_THAT(h.h0(3, 3).real(), WithinAbs(-5.0 * w, 1e-12));
  CHECK_THAT(h.h_carrier(1, 0).real(), WithinAbs(5.0 * w, 1e-12));
  CHECK_THAT(h.h_carrier(1, 2).real(), WithinAbs(1.25 * w, 1e-12));
  CHECK_THAT(h.h_carrier(3, 0).real(), WithinAbs(0.025 * w, 1e-12));
  CHECK(max_abs(Mat4(h.carrier_total() - h.carrier_total().adjoint())) == 0.0);
  CHECK(max_abs(h.h_plus) == 0.0);
}

TEST_CASE("generator agrees with the Kronecker-product construction", "[liouvillian]") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    ConfigInput in = random_input(rng);
    in.laser_B.linewidth_hwhm_MHz = 0.01 * trial;
    in.laser_R.linewidth_hwhm_MHz = 0.02 * trial;
    in.laser_C.linewidth_hwhm_MHz = 0.005 * trial;
    in.atom.gamma_Q_MHz = 0.1 * trial;
    const auto cfg = validate(in);
    const Mat16 m = carrier_superoperator(cfg).matrix();
    const Eigen::MatrixXcd oracle = kronecker_generator(build_hamiltonian(cfg).carrier_total(), cfg);
    CHECK(max_abs(Mat16(m - oracle)) < 1e-12 * max_abs(m));
  }
}

TEST_CASE("generator preserves trace and Hermiticity", "[liouvillian]") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    ConfigInput in = random_input(rng);
    in.laser_R.linewidth_hwhm_MHz = 0.05;
    const auto l = carrier_superoperator(validate(in));
    const Mat4 x = random_matrix(rng);
    const Mat4 hx = 0.5 * (x + x.adjoint());
    const Mat4 d = nscheme::apply(l, hx);
    const double scale = max_abs(l.matrix()) * max_abs(hx);
    CHECK(std::abs(d.trace()) < 1e-13 * scale);
    CHECK(max_abs(Mat4(d - d.adjoint())) < 1e-13 * scale);
    // d/dt X^dagger = (d/dt X)^dagger
    CHECK(max_abs(Mat4(nscheme::apply(l, Mat4(x.adjoint())) - nscheme::apply(l, x).adjoint())) < 1e-13 * scale);
  }
}

TEST_CASE("phase diffusion damps only coherences", "[liouvillian]") {
  ConfigInput in = three_photon_input();
  in.laser_B.linewidth_hwhm_MHz = 0.01;
  in.laser_R.linewidth_hwhm_MHz = 0.02;
  in.laser_C.linewidth_hwhm_MHz = 0.03;
  const auto cfg = validate(in);
  const Mat16 diff = carrier_superoperator(cfg, true).matrix() - carrier_superoperator(cfg, false).matrix();
  const double w = 2.0 * std::numbers::pi;
  CHECK_THAT(diff(vec_index(Level::S, Level::D), vec_index(Level::S, Level::D)).real(), WithinAbs(-0.03 * w, 1e-12));
  CHECK_THAT(diff(vec_index(Level::Q, Level::D), vec_index(Level::Q, Level::D)).real(), WithinAbs(-0.06 * w, 1e-12));
  for (Level l : kLevels) CHECK(diff(vec_index(l, l), vec_index(l, l)) == 0.0);
}

TEST_CASE("non-Hermitian Hamiltonians are rejected", "[liouvillian]") {
  const auto cfg = validate(three_photon_input());
  Mat4 h = Mat4::Zero();
  h(0, 1) = 1.0;
  CHECK(error_code([&] { build_superoperator(h, cfg); }) == ErrorCode::NotHermitian);
}

TEST_CASE("spectral decomposition reconstructs the generator", "[liouvillian]") {
  const auto l = carrier_superoperator(validate(three_photon_input()));
  const auto& sd = l.spectral();
  const Eigen::MatrixXcd rebuilt = sd.vectors * sd.eigenvalues.asDiagonal() * sd.inverse;
  CHECK(max_abs(Mat16(rebuilt - Eigen::MatrixXcd(l.matrix()))) < 1e-9 * max_abs(l.matrix()));
  int zeros = 0;
  for (Eigen::Index k = 0; k < sd.eigenvalues.size(); ++k) {
    zeros += sd.eigenvalues[k] == Complex(0.0, 0.0) ? 1 : 0;
    CHECK(sd.eigenvalues[k].real() <= 0.0);
  }
  CHECK(zeros == 1);
}

TEST_CASE("motional sideband operators are linear in the Lamb-Dicke parameters", "[liouvillian]") {
  const auto h1 = build_hamiltonian(validate(moving_input(-1.0, 0.05)));
  const auto h2 = build_hamiltonian(validate(moving_input(-1.0, 0.10)));
  CHECK(max_abs(Mat4(h2.h_plus - 2.0 * h1.h_plus)) < 1e-14);
  CHECK(max_abs(Mat4(h1.h_plus - h1.h_minus)) == 0.0);
  CHECK(max_abs(Mat4(h1.h_carrier - build_hamiltonian(validate(three_photon_input())).h_carrier)) == 0.0);
  const double w = 2.0 * std::numbers::pi;
  // i eta_B Omega_B / 2 on the S-P element, eta_B = -0.05
  CHECK_THAT(h1.h_plus(1, 0).imag(), WithinAbs(-0.05 * 5.0 * w, 1e-12));
}

TEST_CASE("vectorization is column-major", "[liouvillian]") {
  Mat4 m = Mat4::Zero();
  m(2, 1) = 7.0;
  CHECK(vectorize(m)[vec_index(2, 1)] == Complex(7.0, 0.0));
  CHECK(vec_index(2, 1) == 6);
  CHECK(unvectorize(vectorize(m)) == m);
}
