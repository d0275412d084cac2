#pragma once

#include <functional>
#include <vector>

#include "binoether/common.hpp"

namespace binoether::exterior {

// Phase-space point, block-ordered z = (q_1..q_n, p_1..p_n).
struct PhasePoint {
  Vec z;
  int n = 0;

  PhasePoint() = default;
  PhasePoint(Vec state, int particles) : z(std::move(state)), n(particles) {
    if (n < 1 || z.size() != 2 * n || !z.allFinite())
      throw ValidationError("PhasePoint: need finite z of length 2n, n >= 1");
  }
};

// Vector field E(t, z). Analytic jacobian/hessian are optional; operations
// fall back to central finite differences when they are absent.
// jacobian(t,z)(a,c) = d_c E^a; hessian(t,z)[a](c,d) = d_c d_d E^a.
struct VectorFieldSpec {
  std::function<Vec(double, const Vec&)> eval;
  bool time_dependent = false;
  std::function<Mat(double, const Vec&)> jacobian;
  std::function<std::vector<Mat>(double, const Vec&)> hessian;
};

// Pointwise antisymmetric matrix fields W^{ab}(z) and sigma_{ab}(z).
// make() antisymmetrizes every evaluation so the stored invariant is exact.
struct BivectorField {
  std::function<Mat(const Vec&)> eval;
  static BivectorField make(std::function<Mat(const Vec&)> raw);
  static BivectorField constant(const Mat& value);
};

struct TwoFormField {
  std::function<Mat(const Vec&)> eval;
  static TwoFormField make(std::function<Mat(const Vec&)> raw);
  static TwoFormField constant(const Mat& value);
};

// Totally antisymmetric rank-3 value, stored as T[a](b,c).
using Trivector = std::vector<Mat>;

Mat antisymmetrize(const Mat& m);
Trivector antisymmetrize3(const Trivector& t);
double trivector_max_abs(const Trivector& t);

// Sign and normalization conventions fixed once by calibrate_conventions.
//   inverse_sign: W * invert_bivector(W) = inverse_sign * Id
//   branch:       eigenvalue branch, lambda -> branch * lambda
//   recurrence_sign: global s of the Newton recurrence
//   pair_scale:   per-level factor, Y_k multiplied by pair_scale^k
struct Calibration {
  double inverse_sign = -1.0;
  double branch = 1.0;
  double recurrence_sign = 1.0;
  double pair_scale = 1.0;
  bool calibrated = false;
};

enum class RecurrenceVariant { toda, field };

// g_a(z0): integrate dz/da = E(t0, z) with fixed-step RK4, t frozen at t0.
Vec flow(const VectorFieldSpec& E, const Vec& z0, double t0, double a,
         int steps);

// [E,W]^{ab} = E^c d_c W^{ab} - W^{cb} d_c E^a - W^{ac} d_c E^b.
Mat schouten_vb(const VectorFieldSpec& E, const BivectorField& W, double t,
                const Vec& z);

// Schouten-Nijenhuis bracket of two bivectors, fully antisymmetrized:
// [A,B]^{abc} = sum_cyc(a,b,c) [ A^{da} d_d B^{bc} + B^{da} d_d A^{bc} ].
Trivector schouten_bb(const BivectorField& A, const BivectorField& B,
                      const Vec& z);

// (L_E sigma)_{ab} = E^c d_c sigma_{ab} + sigma_{cb} d_a E^c + sigma_{ac} d_b E^c.
Mat lie_derivative_two_form(const VectorFieldSpec& E, const TwoFormField& sigma,
                            double t, const Vec& z);

// sigma with W * sigma = inverse_sign * Id; throws on (near-)singular W.
Mat invert_bivector(const Mat& w_at_z, double inverse_sign = -1.0);

struct SpectralResult {
  Vec Y;            // Y_1..Y_M
  Vec lambdas;      // paired eigenvalues of R = W * sigma (branch applied)
  double pair_gap;  // worst intra-pair eigenvalue distance
};

// Y_k from the recursion matrix R = W * sigma: eigenvalues must occur in n
// coincident pairs; Y_k = pair_scale^k * e_k(branch * lambda). For k <= 2 a
// trace-contraction route is cross-checked against the eigenvalue route.
SpectralResult spectral_invariants(const Mat& w_at_z, const Mat& sigma_at_z,
                                   int M, const Calibration& cal);

// Newton-identity ladder Y -> I under the stored calibration.
Vec newton_recurrence(const Vec& Y, RecurrenceVariant variant,
                      const Calibration& cal);

// Hooks a model supplies so the convention search stays model-agnostic.
struct CalibrationHooks {
  std::vector<Vec> states;                     // sample states, fixed seed
  std::function<Mat(const Vec&)> bivector;     // W(z)
  std::function<Mat(const Vec&)> omega;        // canonical two-form (optional)
  std::function<Mat(const Vec&)> le_omega;     // sigma(z) = L_E omega
  std::function<Vec(const Vec&, int)> reference_integrals;  // I_1..I_M oracle
  int M = 4;
  RecurrenceVariant variant = RecurrenceVariant::toda;
};

// Exhaustive search over the finite convention set; the unique choice that
// reproduces the reference integrals to 1e-9 relative at every sample state
// wins. No winner, or several, raises CalibrationError listing residuals.
Calibration calibrate_conventions(const CalibrationHooks& hooks);

// {f,g}(z) = grad(f) . W(z) . grad(g), central-difference gradients.
double poisson_bracket(const std::function<double(const Vec&)>& f,
                       const std::function<double(const Vec&)>& g,
                       const BivectorField& W, const Vec& z);

}  // namespace binoether::exterior
