#pragma once

#include <vector>

#include "binoether/common.hpp"
#include "binoether/exterior.hpp"

namespace binoether::toda {

// eps(k): +1 for k >= 1, -1 for k <= -1, 0 for k = 0.
inline double eps_sign(int k) { return k == 0 ? 0.0 : (k > 0 ? 1.0 : -1.0); }

struct TodaState {
  Vec q;
  Vec p;
  double t = 0.0;

  int n() const { return static_cast<int>(q.size()); }
};

TodaState make_state(Vec q, Vec p, double t = 0.0);
Vec pack(const TodaState& s);                 // z = (q_1..q_n, p_1..p_n)
TodaState unpack(const Vec& z, double t = 0.0);

enum class Method { leapfrog, rk4 };

struct TodaTrajectory {
  std::vector<double> times;
  std::vector<Vec> states;  // packed z per time
  Method method = Method::leapfrog;
  double dt = 0.0;
  int n = 0;
};

// Equations of motion; throws on exponent overflow (|q_i - q_{i+1}| > 700).
Vec toda_rhs(const TodaState& s);
Vec toda_rhs_z(int n, const Vec& z);

double toda_hamiltonian(const TodaState& s);

// Master-symmetry generator, explicit t included; the t-term bracket in the
// momentum component closes after the second exponential.
Vec toda_generator(const TodaState& s);
Vec toda_generator_z(int n, const Vec& z, double t);
Mat toda_generator_jacobian(int n, const Vec& z, double t);
std::vector<Mat> toda_generator_hessian(int n, const Vec& z, double t);

// Field wrappers for the exterior-calculus operations.
exterior::VectorFieldSpec generator_field(int n);
exterior::VectorFieldSpec rhs_field(int n);

Mat canonical_W(int n);
Mat canonical_omega(int n);

// sum p_i dp_i^dq_i + sum e^{q_i-q_{i+1}} dq_i^dq_{i+1} + sum_{i<j} dp_i^dp_j.
Mat toda_LEomega(const TodaState& s);

struct ResidualReport {
  std::vector<double> times;
  std::vector<double> r1;  // |d/dt E(q) - E(p)| per sample time
  std::vector<double> r2;  // |d/dt E(p) - linearized force| per sample time
  double max_r1 = 0.0;
  double max_r2 = 0.0;
  bool coarse_dt_warning = false;
};

// Symmetry-condition residual along a trajectory; total time derivative by a
// 4th-order central stencil across snapshots. A perturbation delta*(q,0) can
// be injected for negative controls.
ResidualReport toda_symmetry_residual(const TodaTrajectory& traj,
                                      double perturbation = 0.0);

Vec toda_integrals_closed(const TodaState& s, int M = 4);

Mat lax_matrix(const TodaState& s);
Vec lax_trace_oracle(const TodaState& s, int M);

TodaTrajectory integrate_toda(const TodaState& s0, double dt, double T,
                              Method method);

struct NonNoetherReport {
  double ew_norm = 0.0;     // max-norm of [E,W]
  double yb_scaled = 0.0;   // max-norm of [[E,[E,W]],W] / (1 + |[E,[E,W]]|)
  bool nonnoether = false;  // ew_norm above threshold
  bool yang_baxter = false; // yb_scaled below threshold
};

NonNoetherReport toda_verify_nonnoether(const TodaState& s, double t);

// Same report for an arbitrary field (negative controls).
NonNoetherReport verify_nonnoether_field(const exterior::VectorFieldSpec& E,
                                         int n, double t, const Vec& z);

// Random cubic polynomial field on R^{2n}, used as the Yang-Baxter
// negative control.
exterior::VectorFieldSpec cubic_control_field(int n, Rng& rng);

// Convention calibration against the closed-form integrals; computed once
// and cached (deterministic: fixed internal seed).
const exterior::Calibration& calibration();

TodaState random_state(int n, Rng& rng);

}  // namespace binoether::toda
