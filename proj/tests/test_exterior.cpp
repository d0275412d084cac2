#include <cmath>
#include <functional>

#include "binoether/common.hpp"
#include "binoether/exterior.hpp"
#include "binoether/toda.hpp"
#include "doctest.h"

using namespace binoether;
using exterior::BivectorField;
using exterior::Calibration;
using exterior::RecurrenceVariant;
using exterior::TwoFormField;
using exterior::VectorFieldSpec;

namespace {

VectorFieldSpec zero_field(int d) {
  VectorFieldSpec spec;
  spec.eval = [d](double, const Vec&) { return Vec::Zero(d); };
  return spec;
}

VectorFieldSpec constant_field(const Vec& c) {
  VectorFieldSpec spec;
  spec.eval = [c](double, const Vec&) { return c; };
  return spec;
}

// Hamiltonian field of h = p^2/2 in block coordinates: (p, 0).
VectorFieldSpec kinetic_field(int n) {
  VectorFieldSpec spec;
  spec.eval = [n](double, const Vec& z) {
    Vec out = Vec::Zero(2 * n);
    out.head(n) = z.tail(n);
    return out;
  };
  return spec;
}

Vec elementary_symmetric_direct(const Vec& lam, int M) {
  Vec coef = Vec::Zero(M + 1);
  coef[0] = 1.0;
  for (int i = 0; i < lam.size(); ++i)
    for (int k = std::min(static_cast<int>(i) + 1, M); k >= 1; --k)
      coef[k] += lam[i] * coef[k - 1];
  return coef.tail(M);
}

}  // namespace

// ===== flow =====

TEST_CASE("flow of the zero field fixes every point") {
  Rng rng(1);
  Vec z0 = rng.uniform_vec(6, -1.0, 1.0);
  Vec z1 = exterior::flow(zero_field(6), z0, 0.0, 1.0, 8);
  CHECK((z1 - z0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flow of a constant field is a translation") {
  Rng rng(2);
  Vec z0 = rng.uniform_vec(4, -1.0, 1.0);
  Vec c = rng.uniform_vec(4, -2.0, 2.0);
  Vec z1 = exterior::flow(constant_field(c), z0, 0.0, 0.7, 8);
  CHECK((z1 - (z0 + 0.7 * c)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("flow matches the first-order expansion to second order") {
  Rng rng(3);
  auto E = toda::generator_field(2);
  Vec z0 = rng.uniform_vec(4, -1.0, 1.0);
  auto err = [&](double a) {
    Vec za = exterior::flow(E, z0, 0.0, a, 16);
    Vec lin = z0 + a * E.eval(0.0, z0);
    return (za - lin).cwiseAbs().maxCoeff();
  };
  double e1 = err(1e-3);
  double e2 = err(5e-4);
  CHECK(e1 < 1e-5);
  // quadratic remainder: halving a shrinks the defect by ~4
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("flow rejects bad arguments") {
  CHECK_THROWS_AS(exterior::flow(zero_field(2), Vec::Zero(2), 0.0, 1.0, 0),
                  ValidationError);
  CHECK_THROWS_AS(exterior::flow(zero_field(2), Vec::Zero(2), 0.0,
                                 std::nan(""), 4),
                  ValidationError);
}

// ===== schouten_vb =====

TEST_CASE("hamiltonian fields preserve the canonical bivector") {
  const int n = 3;
  Rng rng(5);
  Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
  auto W = BivectorField::constant(toda::canonical_W(n));
  Mat ew = exterior::schouten_vb(kinetic_field(n), W, 0.0, z);
  CHECK(ew.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("constant field against constant bivector gives exactly zero") {
  const int n = 3;
  Rng rng(6);
  Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
  auto W = BivectorField::constant(toda::canonical_W(n));
  auto E = constant_field(Vec::Constant(2 * n, 0.37));
  CHECK(exterior::schouten_vb(E, W, 0.0, z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("finite-difference jacobian route matches the analytic one") {
  const int n = 2;
  Rng rng(7);
  Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
  auto W = BivectorField::constant(toda::canonical_W(n));
  auto analytic = toda::generator_field(n);
  VectorFieldSpec fd_only;
  fd_only.eval = analytic.eval;
  fd_only.time_dependent = true;
  Mat a = exterior::schouten_vb(analytic, W, 0.4, z);
  Mat f = exterior::schouten_vb(fd_only, W, 0.4, z);
  REQUIRE(a.cwiseAbs().maxCoeff() > 0.1);
  CHECK((a - f).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff() < 1e-6);
}

// ===== schouten_bb =====

TEST_CASE("schouten bracket of a constant bivector with itself vanishes") {
  const int n = 3;
  Rng rng(8);
  Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
  auto W = BivectorField::constant(toda::canonical_W(n));
  CHECK(exterior::trivector_max_abs(exterior::schouten_bb(W, W, z)) == 0.0);
}

TEST_CASE("bracket of W with [E,W] vanishes for a hamiltonian field") {
  const int n = 3;
  Rng rng(9);
  Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
  auto W = BivectorField::constant(toda::canonical_W(n));
  auto ham = kinetic_field(n);
  auto EW = BivectorField::make([&](const Vec& zz) {
    return exterior::schouten_vb(ham, W, 0.0, zz);
  });
  CHECK(exterior::trivector_max_abs(exterior::schouten_bb(W, EW, z)) < 1e-8);
}

TEST_CASE("bracket of W with [E,W] vanishes for the chain generator") {
  const int n = 3;
  Rng rng(10);
  auto W = BivectorField::constant(toda::canonical_W(n));
  auto E = toda::generator_field(n);
  for (int s = 0; s < 5; ++s) {
    Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
    auto EW = BivectorField::make([&](const Vec& zz) {
      return exterior::schouten_vb(E, W, 0.3, zz);
    });
    double scale = 1.0 + EW.eval(z).cwiseAbs().maxCoeff();
    double v = exterior::trivector_max_abs(exterior::schouten_bb(W, EW, z)) /
               scale;
    CHECK(v < 1e-6);
  }
}

// ===== lie_derivative_two_form =====

TEST_CASE("lie derivative along the zero field vanishes") {
  const int n = 2;
  Rng rng(11);
  Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
  auto omega = TwoFormField::constant(toda::canonical_omega(n));
  Mat lie = exterior::lie_derivative_two_form(zero_field(2 * n), omega, 0.0, z);
  CHECK(lie.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lie derivative of omega along the generator matches the display") {
  const int n = 3;
  Rng rng(12);
  auto E = toda::generator_field(n);
  auto omega = TwoFormField::constant(toda::canonical_omega(n));
  for (int s = 0; s < 10; ++s) {
    Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
    Mat lie = exterior::lie_derivative_two_form(E, omega, 0.0, z);
    Mat disp = toda::toda_LEomega(toda::unpack(z, 0.0));
    CHECK((lie - disp).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("lie derivative agrees with the flow-pullback quotient") {
  const int n = 3;
  Rng rng(13);
  Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
  auto E = toda::generator_field(n);
  auto omega = TwoFormField::constant(toda::canonical_omega(n));
  Mat lie = exterior::lie_derivative_two_form(E, omega, 0.0, z);
  const double a = 1e-4;
  const int d = 2 * n;
  auto flow_map = [&](const Vec& zz) {
    return exterior::flow(E, zz, 0.0, a, 4);
  };
  Mat J(d, d);
  const double h = fd_step(1.0);
  for (int c = 0; c < d; ++c) {
    Vec zp = z, zm = z;
    zp[c] += h;
    zm[c] -= h;
    J.col(c) = (flow_map(zp) - flow_map(zm)) / (2.0 * h);
  }
  Mat om = toda::canonical_omega(n);
  Mat quotient = (J.transpose() * om * J - om) / a;
  // first-order quotient: agreement is O(a) relative to the form size
  CHECK((quotient - lie).cwiseAbs().maxCoeff() <
        10.0 * a * (1.0 + lie.cwiseAbs().maxCoeff()));
}

// ===== invert_bivector =====

TEST_CASE("canonical inverse pair at one particle") {
  Mat W = toda::canonical_W(1);
  Mat sigma = exterior::invert_bivector(W, toda::calibration().inverse_sign);
  CHECK(sigma(0, 1) == doctest::Approx(-1.0));
  CHECK(sigma(1, 0) == doctest::Approx(1.0));
  CHECK((W * sigma - toda::calibration().inverse_sign *
                         Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("inverse scales reciprocally") {
  Mat W = toda::canonical_W(2);
  Mat s1 = exterior::invert_bivector(W, -1.0);
  Mat s2 = exterior::invert_bivector(Mat(2.0 * W), -1.0);
  CHECK((s2 - 0.5 * s1).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("random antisymmetric matrix times its inverse is the identity") {
  Rng rng(11);
  Mat R(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) R(i, j) = rng.uniform(-1.0, 1.0);
  Mat A = exterior::antisymmetrize(R);
  Mat sigma = exterior::invert_bivector(A, -1.0);
  CHECK((A * sigma + Mat::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("degenerate bivector is rejected with a condition report") {
  Mat z = Mat::Zero(4, 4);
  CHECK_THROWS_AS(exterior::invert_bivector(z, -1.0), ValidationError);
  CHECK_THROWS_WITH_AS(exterior::invert_bivector(z, -1.0),
                       doctest::Contains("reciprocal condition"),
                       ValidationError);
}

// ===== spectral_invariants =====

TEST_CASE("free particle level one reproduces the momentum") {
  const double pv = 0.7;
  Mat W = toda::canonical_W(1);
  Mat sigma(2, 2);
  sigma << 0.0, -pv, pv, 0.0;  // p dp^dq
  auto sr = exterior::spectral_invariants(W, sigma, 1, toda::calibration());
  CHECK(sr.Y[0] == doctest::Approx(pv).epsilon(1e-12));
}

TEST_CASE("zero two-form gives a zero ladder") {
  Mat W = toda::canonical_W(2);
  auto sr =
      exterior::spectral_invariants(W, Mat::Zero(4, 4), 2, toda::calibration());
  CHECK(sr.Y.cwiseAbs().maxCoeff() == 0.0);
  CHECK(sr.pair_gap == 0.0);
}

TEST_CASE("pipeline output matches the trace oracle at random states") {
  const int n = 3;
  Rng rng(14);
  const auto& cal = toda::calibration();
  for (int s = 0; s < 5; ++s) {
    auto st = toda::random_state(n, rng);
    Mat W = toda::canonical_W(n);
    Mat sigma = toda::toda_LEomega(st);
    auto sr = exterior::spectral_invariants(W, sigma, n, cal);
    Vec I = exterior::newton_recurrence(sr.Y, RecurrenceVariant::toda, cal);
    Vec ref = toda::lax_trace_oracle(st, n);
    for (int m = 0; m < n; ++m)
      CHECK(std::abs(I[m] - ref[m]) < 1e-9 * (1.0 + std::abs(ref[m])));
  }
}

TEST_CASE("eigenvalues of the recursion matrix come in tight pairs") {
  Rng rng(15);
  for (int n : {2, 3, 4, 6}) {
    auto st = toda::random_state(n, rng);
    auto sr = exterior::spectral_invariants(
        toda::canonical_W(n), toda::toda_LEomega(st), n, toda::calibration());
    double rho = sr.lambdas.cwiseAbs().maxCoeff();
    CHECK(sr.pair_gap < 1e-8 * std::max(rho, 1.0));
  }
}

TEST_CASE("order beyond the pair count is rejected") {
  Mat W = toda::canonical_W(2);
  CHECK_THROWS_AS(
      exterior::spectral_invariants(W, Mat::Zero(4, 4), 3, toda::calibration()),
      ValidationError);
}

// ===== newton_recurrence =====

TEST_CASE("zero ladder maps to zero") {
  Vec I = exterior::newton_recurrence(Vec::Zero(4), RecurrenceVariant::toda,
                                      toda::calibration());
  CHECK(I.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("field variant starts with the identity at level one") {
  Vec Y(1);
  Y << 0.83;
  Vec I = exterior::newton_recurrence(Y, RecurrenceVariant::field,
                                      toda::calibration());
  CHECK(I[0] == doctest::Approx(0.83).epsilon(1e-14));
}

TEST_CASE("chain variant turns elementary symmetric into power sums") {
  Rng rng(13);
  Vec lam = rng.uniform_vec(4, -1.5, 1.5);
  Vec e = elementary_symmetric_direct(lam, 4);
  Vec I = exterior::newton_recurrence(e, RecurrenceVariant::toda,
                                      toda::calibration());
  for (int m = 1; m <= 4; ++m) {
    double ps = 0.0;
    for (int i = 0; i < 4; ++i) ps += std::pow(lam[i], m);
    CHECK(I[m - 1] == doctest::Approx(ps / m).epsilon(1e-12));
  }
}

// ===== calibrate_conventions =====

namespace {

exterior::CalibrationHooks toda_hooks(int seed, RecurrenceVariant variant) {
  exterior::CalibrationHooks hooks;
  Rng rng(seed);
  const int n = 3;
  for (int s = 0; s < 10; ++s)
    hooks.states.push_back(toda::pack(toda::random_state(n, rng)));
  hooks.bivector = [n](const Vec&) { return toda::canonical_W(n); };
  hooks.le_omega = [](const Vec& z) {
    return toda::toda_LEomega(toda::unpack(z));
  };
  hooks.reference_integrals = [](const Vec& z, int M) {
    return toda::toda_integrals_closed(toda::unpack(z), M);
  };
  hooks.M = 3;
  hooks.variant = variant;
  return hooks;
}

}  // namespace

TEST_CASE("convention search finds a unique winner") {
  auto cal = exterior::calibrate_conventions(toda_hooks(0, RecurrenceVariant::toda));
  CHECK(cal.calibrated);
  CHECK(cal.inverse_sign == doctest::Approx(-1.0));
  CHECK(cal.branch == doctest::Approx(-1.0));
  CHECK(cal.recurrence_sign == doctest::Approx(-1.0));
  CHECK(cal.pair_scale == doctest::Approx(1.0));
}

TEST_CASE("convention search is seed independent") {
  auto a = exterior::calibrate_conventions(toda_hooks(0, RecurrenceVariant::toda));
  auto b = exterior::calibrate_conventions(toda_hooks(99, RecurrenceVariant::toda));
  CHECK(a.inverse_sign == b.inverse_sign);
  CHECK(a.branch == b.branch);
  CHECK(a.recurrence_sign == b.recurrence_sign);
  CHECK(a.pair_scale == b.pair_scale);
}

TEST_CASE("wrong recurrence variant leaves no consistent convention") {
  CHECK_THROWS_AS(
      exterior::calibrate_conventions(toda_hooks(0, RecurrenceVariant::field)),
      CalibrationError);
}

// ===== poisson_bracket =====

TEST_CASE("canonical coordinate bracket is constant") {
  const int n = 3;
  Rng rng(15);
  auto W = BivectorField::constant(toda::canonical_W(n));
  auto fq = [](const Vec& z) { return z[0]; };
  auto fp = [n](const Vec& z) { return z[n]; };
  for (int s = 0; s < 3; ++s) {
    Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
    CHECK(exterior::poisson_bracket(fq, fp, W, z) ==
          doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("bracket of an observable with itself vanishes") {
  const int n = 3;
  Rng rng(16);
  Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
  auto W = BivectorField::constant(toda::canonical_W(n));
  auto f = [](const Vec& zz) { return std::sin(zz[0]) * zz[3]; };
  CHECK(std::abs(exterior::poisson_bracket(f, f, W, z)) < 1e-12);
}

TEST_CASE("ladder entries two and three are in involution") {
  const int n = 3;
  Rng rng(17);
  auto W = BivectorField::constant(toda::canonical_W(n));
  auto I2 = [](const Vec& z) {
    return toda::toda_integrals_closed(toda::unpack(z), 4)[1];
  };
  auto I3 = [](const Vec& z) {
    return toda::toda_integrals_closed(toda::unpack(z), 4)[2];
  };
  for (int s = 0; s < 5; ++s) {
    Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
    CHECK(std::abs(exterior::poisson_bracket(I2, I3, W, z)) < 1e-6);
  }
}

TEST_CASE("bracket satisfies the leibniz rule") {
  const int n = 3;
  Rng rng(18);
  Vec z = rng.uniform_vec(2 * n, -1.0, 1.0);
  auto W = BivectorField::constant(toda::canonical_W(n));
  auto f = [](const Vec& zz) { return std::sin(zz[0]) * zz[3]; };
  auto g = [](const Vec& zz) { return std::cos(zz[1] + zz[4]); };
  auto h = [](const Vec& zz) { return zz[2] * zz[2] + 0.3 * zz[5]; };
  auto gh = [&](const Vec& zz) { return g(zz) * h(zz); };
  double lhs = exterior::poisson_bracket(f, gh, W, z);
  double rhs = g(z) * exterior::poisson_bracket(f, h, W, z) +
               h(z) * exterior::poisson_bracket(f, g, W, z);
  CHECK(std::abs(lhs - rhs) < 1e-6);
}

// ===== construction invariants =====

TEST_CASE("constructed fields are exactly antisymmetric") {
  Rng rng(19);
  auto raw = [&](const Vec& z) {
    Mat m(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        m(i, j) = std::sin(z[i % z.size()]) + 0.3 * i - 0.7 * j * j;
    return m;
  };
  auto W = BivectorField::make(raw);
  auto S = TwoFormField::make(raw);
  Vec z = rng.uniform_vec(4, -1.0, 1.0);
  Mat w = W.eval(z);
  Mat s = S.eval(z);
  CHECK((w + w.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((s + s.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trivector antisymmetrization flips sign under any transposition") {
  Rng rng(20);
  exterior::Trivector t(4, Mat::Zero(4, 4));
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) t[a](b, c) = rng.uniform(-1.0, 1.0);
  auto anti = exterior::antisymmetrize3(t);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c) {
        CHECK(anti[a](b, c) == doctest::Approx(-anti[b](a, c)).epsilon(1e-14));
        CHECK(anti[a](b, c) == doctest::Approx(-anti[a](c, b)).epsilon(1e-14));
      }
}

TEST_CASE("phase points validate their shape") {
  CHECK_THROWS_AS(exterior::PhasePoint(Vec::Zero(3), 2), ValidationError);
  CHECK_THROWS_AS(exterior::PhasePoint(Vec::Zero(0), 0), ValidationError);
  Vec bad = Vec::Zero(4);
  bad[1] = std::nan("");
  CHECK_THROWS_AS(exterior::PhasePoint(bad, 2), ValidationError);
  CHECK_NOTHROW(exterior::PhasePoint(Vec::Zero(4), 2));
}
