#include <cmath>
#include <cstdio>
#include <filesystem>

#include "binoether/common.hpp"
#include "binoether/fieldkit.hpp"
#include "binoether/pdemodels.hpp"
#include "doctest.h"

using namespace binoether;
using fieldkit::Anchor;
using fieldkit::Grid;
using fieldkit::Structure;
using fieldkit::TwoFormKind;

namespace {

Grid box() { return Grid::make(40.0, 256); }

Vec gaussian(const Grid& g, double amp, double denom, double center = 0.0) {
  Vec xs = g.x();
  Vec u(g.N);
  for (int j = 0; j < g.N; ++j)
    u[j] = amp * std::exp(-(xs[j] - center) * (xs[j] - center) / denom);
  return u;
}

Vec cos_mode(const Grid& g, int m) {
  Vec xs = g.x();
  Vec f(g.N);
  for (int j = 0; j < g.N; ++j)
    f[j] = std::cos(2.0 * M_PI * m * xs[j] / g.L);
  return f;
}

Vec sin_mode(const Grid& g, int m) {
  Vec xs = g.x();
  Vec f(g.N);
  for (int j = 0; j < g.N; ++j)
    f[j] = std::sin(2.0 * M_PI * m * xs[j] / g.L);
  return f;
}

}  // namespace

// ===== grid =====

TEST_CASE("grid samples start at the left edge with uniform spacing") {
  Grid g = box();
  Vec xs = g.x();
  CHECK(xs[0] == doctest::Approx(-20.0));
  CHECK(xs[1] - xs[0] == doctest::Approx(g.dx()));
  CHECK(g.dx() == doctest::Approx(40.0 / 256));
  CHECK(fieldkit::same_grid(g, Grid::make(40.0, 256)));
  CHECK_FALSE(fieldkit::same_grid(g, Grid::make(40.0, 128)));
}

TEST_CASE("grid construction validates length and sample count") {
  CHECK_THROWS_AS(Grid::make(0.0, 256), ValidationError);
  CHECK_THROWS_AS(Grid::make(40.0, 100), ValidationError);  // not a power of two
  CHECK_THROWS_AS(Grid::make(40.0, 8), ValidationError);    // below minimum
  CHECK_NOTHROW(Grid::make(40.0, 16));
}

// ===== transforms and derivatives =====

TEST_CASE("forward and inverse transforms are inverse") {
  Rng rng(41);
  CVec f(64);
  for (int j = 0; j < 64; ++j)
    f[j] = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  CVec back = fieldkit::ifft(fieldkit::fft(f));
  double worst = 0.0;
  for (int j = 0; j < 64; ++j) worst = std::max(worst, std::abs(back[j] - f[j]));
  CHECK(worst < 1e-13);
}

TEST_CASE("derivative of a single mode is exact") {
  Grid g = box();
  Vec f = sin_mode(g, 1);
  Vec df = fieldkit::spectral_derivative(g, f, 1);
  const double k = 2.0 * M_PI / g.L;
  Vec ref = k * cos_mode(g, 1);
  CHECK((df - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("derivative of a constant vanishes") {
  Grid g = box();
  for (int order : {1, 2, 3}) {
    Vec df = fieldkit::spectral_derivative(g, Vec(Vec::Constant(g.N, 2.5)),
                                           order);
    CHECK(df.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("derivative composition equals the second derivative") {
  Grid g = box();
  Rng rng(42);
  Vec f = Vec::Zero(g.N);
  for (int m = 1; m <= 6; ++m) {
    double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
    f += a * cos_mode(g, m) + b * sin_mode(g, m);
  }
  Vec twice = fieldkit::spectral_derivative(
      g, fieldkit::spectral_derivative(g, f, 1), 1);
  Vec second = fieldkit::spectral_derivative(g, f, 2);
  CHECK((twice - second).cwiseAbs().maxCoeff() < 1e-10);
}

// ===== antiderivative =====

TEST_CASE("zero-mean antiderivative of a cosine mode") {
  Grid g = box();
  Vec f = cos_mode(g, 1);
  Vec F = fieldkit::antiderivative(g, f, Anchor::zero_mean);
  Vec ref = (g.L / (2.0 * M_PI)) * sin_mode(g, 1);
  CHECK((F - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("antiderivative of zero is zero under either anchoring") {
  Grid g = box();
  Vec z = Vec::Zero(g.N);
  CHECK(fieldkit::antiderivative(g, z, Anchor::zero_mean)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(fieldkit::antiderivative(g, z, Anchor::left_anchored)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("left-anchored antiderivative is the running integral") {
  Grid g = box();
  const double amp = 1.0, denom = 4.0;
  Vec f = gaussian(g, amp, denom);
  Vec F = fieldkit::antiderivative(g, f, Anchor::left_anchored);
  CHECK(std::abs(F[0]) < 1e-12);  // anchored at the left edge
  Vec xs = g.x();
  const double s = std::sqrt(denom);
  double worst = 0.0;
  for (int j = 0; j < g.N; ++j) {
    double exact = amp * s * std::sqrt(M_PI) / 2.0 *
                   (std::erf(xs[j] / s) - std::erf(-g.L / 2.0 / s));
    worst = std::max(worst, std::abs(F[j] - exact));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("zero-mean anchoring rejects data with a mean") {
  Grid g = box();
  CHECK_THROWS_AS(
      fieldkit::antiderivative(g, Vec(Vec::Constant(g.N, 1.0)),
                               Anchor::zero_mean),
      ValidationError);
}

TEST_CASE("derivative and antiderivative are an inverse pair on zero-mean data") {
  Grid g = box();
  Rng rng(43);
  Vec f = Vec::Zero(g.N);
  for (int m = 1; m <= 8; ++m) {
    f += rng.uniform(-1.0, 1.0) * cos_mode(g, m);
    f += rng.uniform(-1.0, 1.0) * sin_mode(g, m);
  }
  Vec round =
      fieldkit::spectral_derivative(g,
                                    fieldkit::antiderivative(g, f,
                                                             Anchor::zero_mean),
                                    1);
  CHECK((round - f).cwiseAbs().maxCoeff() < 1e-10);
}

// ===== quadrature =====

TEST_CASE("quadrature of one is the box length") {
  Grid g = box();
  CHECK(fieldkit::quadrature(g, Vec(Vec::Ones(g.N))) ==
        doctest::Approx(40.0).epsilon(1e-14));
}

TEST_CASE("quadrature of a pure mode vanishes") {
  Grid g = box();
  CHECK(std::abs(fieldkit::quadrature(g, sin_mode(g, 1))) < 1e-12);
}

TEST_CASE("plane-wave modulus integrates exactly") {
  Grid g = box();
  Vec xs = g.x();
  const double A = 0.7;
  const double k = 2.0 * M_PI * 3 / g.L;
  CVec psi(g.N);
  for (int j = 0; j < g.N; ++j) psi[j] = A * std::exp(cplx(0.0, k * xs[j]));
  CVec density(g.N);
  for (int j = 0; j < g.N; ++j) density[j] = psi[j] * std::conj(psi[j]);
  CHECK(fieldkit::quadrature(g, density) ==
        doctest::Approx(A * A * g.L).epsilon(1e-13));
}

TEST_CASE("imaginary residue above threshold is rejected") {
  Grid g = box();
  CVec bad = CVec::Constant(g.N, cplx(1.0, 0.5));
  CHECK_THROWS_AS(fieldkit::quadrature(g, bad), ValidationError);
}

TEST_CASE("parseval identity links both sides of the transform") {
  Grid g = box();
  Rng rng(44);
  CVec f(g.N);
  for (int j = 0; j < g.N; ++j)
    f[j] = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  CVec density(g.N);
  for (int j = 0; j < g.N; ++j) density[j] = f[j] * std::conj(f[j]);
  double direct = fieldkit::quadrature(g, density);
  CVec F = fieldkit::fft(f);
  double fourier = 0.0;
  for (int j = 0; j < g.N; ++j) fourier += std::norm(F[j]);
  fourier *= g.dx() / g.N;
  CHECK(direct == doctest::Approx(fourier).epsilon(1e-10));
}

// ===== directional derivatives =====

TEST_CASE("directional derivative of a linear functional is exact") {
  Grid g = box();
  Rng rng(45);
  Vec u = gaussian(g, 0.6, 5.0);
  Vec delta = pdemodels::compact_variation(g, rng);
  auto F = [&](const Vec& w) { return fieldkit::quadrature(g, w); };
  double want = fieldkit::quadrature(g, delta);
  CHECK(fieldkit::gateaux(F, u, delta) ==
        doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("directional derivative of the quadratic energy") {
  Grid g = box();
  Rng rng(46);
  Vec u = gaussian(g, 0.6, 5.0);
  Vec delta = pdemodels::compact_variation(g, rng);
  auto F = [&](const Vec& w) {
    return fieldkit::quadrature(g, Vec(w.cwiseProduct(w)));
  };
  double want = 2.0 * fieldkit::quadrature(g, Vec(u.cwiseProduct(delta)));
  CHECK(std::abs(fieldkit::gateaux(F, u, delta) - want) < 1e-8);
}

TEST_CASE("central differences converge at second order") {
  Grid g = box();
  Rng rng(47);
  Vec u = gaussian(g, 0.6, 5.0);
  Vec delta = pdemodels::compact_variation(g, rng);
  auto F = [&](const Vec& w) {
    Vec w3 = w.cwiseProduct(w).cwiseProduct(w);
    return fieldkit::quadrature(g, w3);
  };
  Vec u2 = u.cwiseProduct(u);
  double exact = 3.0 * fieldkit::quadrature(g, Vec(u2.cwiseProduct(delta)));
  auto fd = [&](double h) {
    return (F(u + h * delta) - F(u - h * delta)) / (2.0 * h);
  };
  double e1 = std::abs(fd(1e-2) - exact);
  double e2 = std::abs(fd(5e-3) - exact);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.05));
}

// ===== functional gradients =====

TEST_CASE("gradient of the plain integral is one everywhere") {
  Grid g = box();
  fieldkit::Functional F{"mass",
                         [](const Grid& gg, const Vec& w) {
                           return fieldkit::quadrature(gg, w);
                         },
                         nullptr};
  Vec grad = fieldkit::functional_gradient(g, F, gaussian(g, 0.6, 5.0));
  CHECK((grad - Vec::Ones(g.N)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gradient of the derivative energy is the euler-lagrange form") {
  Grid g = box();
  fieldkit::Functional F{"bend",
                         [](const Grid& gg, const Vec& w) {
                           Vec wx = fieldkit::spectral_derivative(gg, w, 1);
                           return fieldkit::quadrature(gg,
                                                       Vec(wx.cwiseProduct(wx)));
                         },
                         nullptr};
  Vec u = gaussian(g, 0.6, 5.0);
  Vec grad = fieldkit::functional_gradient(g, F, u);
  Vec ref = -2.0 * fieldkit::spectral_derivative(g, u, 2);
  CHECK((grad - ref).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("a wrong closed-form gradient is caught by the cross-check") {
  Grid g = box();
  fieldkit::Functional F{"mass",
                         [](const Grid& gg, const Vec& w) {
                           return fieldkit::quadrature(gg, w);
                         },
                         [](const Grid& gg, const Vec&) {
                           return Vec(Vec::Constant(gg.N, 2.0));  // off by 2x
                         }};
  CHECK_THROWS_AS(
      fieldkit::functional_gradient(g, F, gaussian(g, 0.6, 5.0)),
      ValidationError);
}

// ===== poisson structures =====

TEST_CASE("brackets refuse to run before calibration") {
  Grid g = box();
  fieldkit::BracketCalibration raw;  // not calibrated
  Vec a = gaussian(g, 0.5, 4.0), b = gaussian(g, 0.4, 6.0);
  CHECK_THROWS_AS(
      fieldkit::field_poisson_bracket(g, Structure::gardner, a, b, raw),
      CalibrationError);
}

TEST_CASE("bracket of a functional with itself vanishes") {
  Grid g = box();
  const auto& cal = pdemodels::structure_calibration(Structure::gardner);
  Vec grad = gaussian(g, 0.5, 4.0);
  CHECK(std::abs(fieldkit::field_poisson_bracket(g, Structure::gardner, grad,
                                                 grad, cal)) < 1e-10);
}

TEST_CASE("brackets are antisymmetric and bilinear") {
  Grid g = box();
  const auto& cal = pdemodels::structure_calibration(Structure::gardner);
  Rng rng(48);
  Vec a = pdemodels::compact_variation(g, rng);
  Vec b = pdemodels::compact_variation(g, rng);
  Vec c = pdemodels::compact_variation(g, rng);
  double ab = fieldkit::field_poisson_bracket(g, Structure::gardner, a, b, cal);
  double ba = fieldkit::field_poisson_bracket(g, Structure::gardner, b, a, cal);
  CHECK(ab == doctest::Approx(-ba).epsilon(1e-10));
  double lin = fieldkit::field_poisson_bracket(
      g, Structure::gardner, Vec(2.0 * a + 0.5 * c), b, cal);
  double parts =
      2.0 * ab +
      0.5 * fieldkit::field_poisson_bracket(g, Structure::gardner, c, b, cal);
  CHECK(lin == doctest::Approx(parts).epsilon(1e-10));
}

TEST_CASE("the bracket flow of the cubic hamiltonian is the model flow") {
  Grid g = box();
  const auto& cal = pdemodels::structure_calibration(Structure::gardner);
  Vec u = gaussian(g, 0.5, 4.5);
  // h = int(u_x^2 - u^3/3), variational derivative -2 u_xx - u^2
  Vec grad_h =
      -2.0 * fieldkit::spectral_derivative(g, u, 2) - u.cwiseProduct(u);
  Vec flow = fieldkit::bracket_flow(g, Structure::gardner, grad_h, cal);
  Vec rhs = -(fieldkit::spectral_derivative(g, u, 3) +
              u.cwiseProduct(fieldkit::spectral_derivative(g, u, 1)));
  CHECK((flow - rhs).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("a non-conserved probe produces a visibly nonzero bracket") {
  Grid g = box();
  const auto& cal = pdemodels::structure_calibration(Structure::gardner);
  // off-center data so parity does not hide the probe
  Vec u = gaussian(g, 0.5, 4.5, 3.0);
  Vec grad_G = cos_mode(g, 1);
  Vec grad_I3 = fieldkit::functional_gradient(
      g, pdemodels::invariant_functional(pdemodels::Kind::kdv, 3), u);
  double v = fieldkit::field_poisson_bracket(g, Structure::gardner, grad_I3,
                                             grad_G, cal);
  CHECK(std::abs(v) > 1e-3);
  // a constant gradient pairs to zero: the bracket differentiates it away
  Vec grad_I1 = Vec::Constant(g.N, 2.0 / 3.0);
  double trivial = fieldkit::field_poisson_bracket(g, Structure::gardner,
                                                   grad_G, grad_I1, cal);
  CHECK(std::abs(trivial) < 1e-10);
}

// ===== two-forms =====

TEST_CASE("two-forms vanish on a repeated variation") {
  Grid g = box();
  Rng rng(49);
  Vec d = pdemodels::compact_variation(g, rng);
  Vec base = gaussian(g, 0.5, 4.5);
  for (auto kind : {TwoFormKind::canonical_gardner, TwoFormKind::leo_kdv,
                    TwoFormKind::leo_mkdv})
    CHECK(fieldkit::two_form_eval(g, kind, base, d, d) == 0.0);
}

TEST_CASE("canonical pairing of a cosine and sine mode in closed form") {
  Grid g = box();
  const int m = 3;
  double v = fieldkit::two_form_eval(g, TwoFormKind::canonical_gardner,
                                     Vec(Vec::Zero(g.N)), cos_mode(g, m),
                                     sin_mode(g, m));
  CHECK(v == doctest::Approx(-g.L * g.L / (2.0 * M_PI * m)).epsilon(1e-12));
}

TEST_CASE("model two-form at zero background reduces to the derivative pairing") {
  Grid g = box();
  const int m = 2;
  double v = fieldkit::two_form_eval(g, TwoFormKind::leo_kdv,
                                     Vec(Vec::Zero(g.N)), cos_mode(g, m),
                                     sin_mode(g, m));
  // int(d1 d2_x - d2 d1_x) = 2 pi m for this pair
  CHECK(v == doctest::Approx(2.0 * M_PI * m).epsilon(1e-12));
}

TEST_CASE("two-forms are antisymmetric and bilinear") {
  Grid g = box();
  Rng rng(50);
  Vec base = gaussian(g, 0.5, 4.5);
  Vec d1 = pdemodels::compact_variation(g, rng);
  Vec d2 = pdemodels::compact_variation(g, rng);
  Vec d3 = pdemodels::compact_variation(g, rng);
  for (auto kind : {TwoFormKind::canonical_gardner, TwoFormKind::leo_kdv,
                    TwoFormKind::leo_mkdv}) {
    double ab = fieldkit::two_form_eval(g, kind, base, d1, d2);
    double ba = fieldkit::two_form_eval(g, kind, base, d2, d1);
    CHECK(ab == doctest::Approx(-ba).epsilon(1e-12));
    double lin = fieldkit::two_form_eval(g, kind, base,
                                         Vec(1.5 * d1 - 0.5 * d3), d2);
    double parts = 1.5 * ab -
                   0.5 * fieldkit::two_form_eval(g, kind, base, d3, d2);
    CHECK(lin == doctest::Approx(parts).epsilon(1e-9));
  }
}

TEST_CASE("complex canonical pairing is real and antisymmetric") {
  Grid g = box();
  Rng rng(51);
  CVec base(g.N);
  Vec e = gaussian(g, 0.8, 4.0);
  for (int j = 0; j < g.N; ++j) base[j] = e[j];
  CVec d1 = pdemodels::compact_variation_c(g, rng);
  CVec d2 = pdemodels::compact_variation_c(g, rng);
  double ab = fieldkit::two_form_eval(g, TwoFormKind::canonical_nse, base, d1,
                                      d2);
  double ba = fieldkit::two_form_eval(g, TwoFormKind::canonical_nse, base, d2,
                                      d1);
  CHECK(ab == doctest::Approx(-ba).epsilon(1e-12));
  CHECK(fieldkit::two_form_eval(g, TwoFormKind::canonical_nse, base, d1, d1) ==
        0.0);
}

TEST_CASE("real-field kinds reject complex input and vice versa") {
  Grid g = box();
  Vec r = Vec::Zero(g.N);
  CVec c = CVec::Zero(g.N);
  CHECK_THROWS_AS(
      fieldkit::two_form_eval(g, TwoFormKind::canonical_nse, r, r, r),
      ValidationError);
  CHECK_THROWS_AS(fieldkit::two_form_eval(g, TwoFormKind::leo_kdv, c, c, c),
                  ValidationError);
}

// ===== snapshots =====

TEST_CASE("real snapshot round-trip preserves data and metadata") {
  Grid g = Grid::make(40.0, 64);
  Vec f = gaussian(g, 0.5, 4.5);
  std::string path = "/tmp/binoether_test_snap_real.txt";
  fieldkit::write_snapshot(path, g, f, 1.25);
  auto snap = fieldkit::read_snapshot(path);
  CHECK_FALSE(snap.is_complex);
  CHECK(snap.grid.L == doctest::Approx(40.0));
  CHECK(snap.grid.N == 64);
  CHECK(snap.t == doctest::Approx(1.25));
  CHECK((snap.real_samples - f).cwiseAbs().maxCoeff() < 1e-15);
  std::filesystem::remove(path);
}

TEST_CASE("complex snapshot round-trip preserves both parts") {
  Grid g = Grid::make(20.0, 32);
  Rng rng(52);
  CVec f(g.N);
  for (int j = 0; j < g.N; ++j)
    f[j] = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  std::string path = "/tmp/binoether_test_snap_cplx.txt";
  fieldkit::write_snapshot(path, g, f, 0.0);
  auto snap = fieldkit::read_snapshot(path);
  CHECK(snap.is_complex);
  double worst = 0.0;
  for (int j = 0; j < g.N; ++j)
    worst = std::max(worst, std::abs(snap.complex_samples[j] - f[j]));
  CHECK(worst < 1e-15);
  std::filesystem::remove(path);
}

TEST_CASE("snapshot reader reports malformed input") {
  std::string path = "/tmp/binoether_test_snap_bad.txt";
  {
    std::FILE* fp = std::fopen(path.c_str(), "w");
    std::fputs("not a snapshot\n1 2 3\n", fp);
    std::fclose(fp);
  }
  CHECK_THROWS_AS(fieldkit::read_snapshot(path), IoError);
  CHECK_THROWS_AS(fieldkit::read_snapshot("/tmp/no_such_snapshot_file.txt"),
                  IoError);
  std::filesystem::remove(path);
}
