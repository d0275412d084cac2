#pragma once

#include <functional>
#include <string>
#include <vector>

#include "binoether/common.hpp"

namespace binoether::fieldkit {

// Uniform periodic grid on [-L/2, L/2), x_j = -L/2 + j L/N.
struct Grid {
  double L = 40.0;
  int N = 256;

  static Grid make(double L, int N);
  double dx() const { return L / N; }
  Vec x() const;
  // Angular wavenumbers in transform ordering: 2*pi*m/L with
  // m = 0..N/2-1, -N/2..-1.
  Vec wavenumbers() const;
};

bool same_grid(const Grid& a, const Grid& b);

struct RealField {
  Grid grid;
  Vec samples;
};

struct ComplexField {
  Grid grid;
  CVec samples;
};

RealField make_field(const Grid& g, Vec samples);
ComplexField make_field(const Grid& g, CVec samples);

// Complex-to-complex FFT with cached per-size plans (internally synchronized,
// safe for concurrent calls). ifft includes the 1/N factor.
CVec fft(const CVec& in);
CVec ifft(const CVec& in);

// Fourier differentiation (i k)^order; Nyquist mode zeroed for odd orders.
Vec spectral_derivative(const Grid& g, const Vec& f, int order);
CVec spectral_derivative(const Grid& g, const CVec& f, int order);

enum class Anchor { zero_mean, left_anchored };

// Periodic antiderivative. zero_mean requires |mean(f)| < 1e-10 and inverts
// ik with the zero mode dropped; left_anchored splits off the mean as a
// linear ramp from x = -L/2 and anchors the value at the left edge to 0.
Vec antiderivative(const Grid& g, const Vec& f, Anchor anchor);

// Rectangle rule (L/N) * sum(f); spectrally accurate on periodic data. The
// complex overload returns the real part and rejects an imaginary residue
// above 1e-10 * max(1, |real part|).
double quadrature(const Grid& g, const Vec& f);
double quadrature(const Grid& g, const CVec& f);

// Central-difference directional derivatives in function space, step
// cbrt(eps) * max(1,|u|) / max(1,|delta|).
double gateaux(const std::function<double(const Vec&)>& F, const Vec& u,
               const Vec& delta);
double gateaux(const std::function<double(const CVec&)>& F, const CVec& u,
               const CVec& delta);
Vec gateaux_map(const std::function<Vec(const Vec&)>& F, const Vec& u,
                const Vec& delta);
CVec gateaux_map(const std::function<CVec(const CVec&)>& F, const CVec& u,
                 const CVec& delta);

// Functional of a real field. el_gradient, when present, is the
// Euler-Lagrange closed form used to cross-check the finite-difference
// gradient.
struct Functional {
  std::string name;
  std::function<double(const Grid&, const Vec&)> eval;
  std::function<Vec(const Grid&, const Vec&)> el_gradient;
};

// Functional of a complex field; el_gradient returns dF/dpsi (Wirtinger).
struct ComplexFunctional {
  std::string name;
  std::function<double(const Grid&, const CVec&)> eval;
  std::function<CVec(const Grid&, const CVec&)> el_gradient;
};

// Grid samples of dF/du (respectively dF/dpsi), primary route per-node
// central differences divided by dx. When the functional carries an
// Euler-Lagrange form the two routes must agree to 1e-4.
Vec functional_gradient(const Grid& g, const Functional& F, const Vec& u);
CVec functional_gradient(const Grid& g, const ComplexFunctional& F,
                         const CVec& psi);

// Field-theoretic Poisson structures. gardner acts on real fields through
// {F,G} = s * int gF d_x(gG); nse on complex fields through
// {F,G} = s * Re[i * int (gF conj(gG) - conj(gF) gG)], gradients dF/dpsi.
// The sign s is fixed by requiring the model flow u_t = {h, u}; brackets
// refuse to evaluate before that calibration ran.
enum class Structure { gardner, nse };

struct BracketCalibration {
  double s = 0.0;
  bool calibrated = false;
};

double field_poisson_bracket(const Grid& g, Structure st, const Vec& grad_f,
                             const Vec& grad_g, const BracketCalibration& cal);
double field_poisson_bracket(const Grid& g, Structure st, const CVec& grad_f,
                             const CVec& grad_g, const BracketCalibration& cal);

// The flow {h, u(x)} induced by the bracket, from the gradient of h:
// gardner: -s d_x(grad_h); nse: -s i conj(grad_h) with grad_h = dh/dpsi.
Vec bracket_flow(const Grid& g, Structure st, const Vec& grad_h,
                 const BracketCalibration& cal);
CVec bracket_flow(const Grid& g, Structure st, const CVec& grad_h,
                  const BracketCalibration& cal);

// Antisymmetric bilinear forms on variations. canonical_gardner is
// int (du ^ dv) with dv the anchored antiderivative of du; canonical_nse is
// Re i int (dpsi ^ dpsibar); the leo_* kinds are the model-specific
// Lie-derivative forms with dv, dw, dphi built from the base field.
enum class TwoFormKind {
  canonical_gardner,
  canonical_nse,
  leo_kdv,
  leo_mkdv,
  leo_nse
};

double two_form_eval(const Grid& g, TwoFormKind kind, const Vec& base,
                     const Vec& d1, const Vec& d2);
double two_form_eval(const Grid& g, TwoFormKind kind, const CVec& base,
                     const CVec& d1, const CVec& d2);

// Numerical Lie derivative of a two-form along a generator by the
// commutator route:
//   (L_E omega)(d1,d2) = E[omega(d1,d2)] + omega(E'[d1], d2) + omega(d1, E'[d2])
// with E' the Gateaux derivative of the generator.
double lie_derivative_commutator(
    const Grid& g,
    const std::function<double(const Vec&, const Vec&, const Vec&)>& omega,
    const std::function<Vec(const Vec&, double)>& E, const Vec& u,
    const Vec& d1, const Vec& d2, double t);
double lie_derivative_commutator(
    const Grid& g,
    const std::function<double(const CVec&, const CVec&, const CVec&)>& omega,
    const std::function<CVec(const CVec&, double)>& E, const CVec& psi,
    const CVec& d1, const CVec& d2, double t);

// Plain-text snapshot: header "# L=<float> N=<int> kind=<real|complex>
// t=<float>", then N rows "x value" or "x re im"; C-locale decimals,
// 17 significant digits.
struct Snapshot {
  Grid grid;
  bool is_complex = false;
  Vec real_samples;
  CVec complex_samples;
  double t = 0.0;
};

void write_snapshot(const std::string& path, const Grid& g, const Vec& f,
                    double t);
void write_snapshot(const std::string& path, const Grid& g, const CVec& f,
                    double t);
Snapshot read_snapshot(const std::string& path);

}  // namespace binoether::fieldkit
