#include "binoether/exterior.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace binoether::exterior {

namespace {

Mat fd_jacobian(const VectorFieldSpec& E, double t, const Vec& z) {
  const int d = static_cast<int>(z.size());
  const double h = fd_step(z.cwiseAbs().maxCoeff());
  Mat J(d, d);
  Vec zp = z, zm = z;
  for (int c = 0; c < d; ++c) {
    zp[c] += h;
    zm[c] -= h;
    J.col(c) = (E.eval(t, zp) - E.eval(t, zm)) / (2.0 * h);
    zp[c] = z[c];
    zm[c] = z[c];
  }
  return J;
}

// d_c M_{ab} for a matrix-valued field, layout out[c](a,b).
std::vector<Mat> fd_matrix_derivative(const std::function<Mat(const Vec&)>& F,
                                      const Vec& z) {
  const int d = static_cast<int>(z.size());
  const double h = fd_step(z.cwiseAbs().maxCoeff());
  std::vector<Mat> out(d);
  Vec zp = z, zm = z;
  for (int c = 0; c < d; ++c) {
    zp[c] += h;
    zm[c] -= h;
    out[c] = (F(zp) - F(zm)) / (2.0 * h);
    zp[c] = z[c];
    zm[c] = z[c];
  }
  return out;
}

Vec elementary_symmetric(const Vec& lam) {
  const int n = static_cast<int>(lam.size());
  // Coefficients of prod_i (x - lam_i): e_k = (-1)^k * coeff.
  Vec coeff = Vec::Zero(n + 1);
  coeff[0] = 1.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j >= 1; --j) coeff[j] -= lam[i] * coeff[j - 1];
  Vec e(n);
  for (int k = 1; k <= n; ++k) e[k - 1] = ((k % 2) ? -1.0 : 1.0) * coeff[k];
  return e;
}

}  // namespace

Mat antisymmetrize(const Mat& m) { return 0.5 * (m - m.transpose()); }

Trivector antisymmetrize3(const Trivector& t) {
  const int d = static_cast<int>(t.size());
  Trivector out(d, Mat::Zero(d, d));
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c)
        out[a](b, c) = (t[a](b, c) + t[b](c, a) + t[c](a, b) - t[a](c, b) -
                        t[b](a, c) - t[c](b, a)) /
                       6.0;
  return out;
}

double trivector_max_abs(const Trivector& t) {
  double m = 0.0;
  for (const Mat& s : t) m = std::max(m, s.cwiseAbs().maxCoeff());
  return m;
}

BivectorField BivectorField::make(std::function<Mat(const Vec&)> raw) {
  return BivectorField{
      [raw = std::move(raw)](const Vec& z) { return antisymmetrize(raw(z)); }};
}

BivectorField BivectorField::constant(const Mat& value) {
  Mat v = antisymmetrize(value);
  return BivectorField{[v](const Vec&) { return v; }};
}

TwoFormField TwoFormField::make(std::function<Mat(const Vec&)> raw) {
  return TwoFormField{
      [raw = std::move(raw)](const Vec& z) { return antisymmetrize(raw(z)); }};
}

TwoFormField TwoFormField::constant(const Mat& value) {
  Mat v = antisymmetrize(value);
  return TwoFormField{[v](const Vec&) { return v; }};
}

Vec flow(const VectorFieldSpec& E, const Vec& z0, double t0, double a,
         int steps) {
  if (steps < 1) throw ValidationError("flow: steps must be >= 1");
  if (!std::isfinite(a)) throw ValidationError("flow: group parameter not finite");
  const double da = a / steps;
  Vec z = z0;
  for (int s = 0; s < steps; ++s) {
    Vec k1 = E.eval(t0, z);
    Vec k2 = E.eval(t0, z + 0.5 * da * k1);
    Vec k3 = E.eval(t0, z + 0.5 * da * k2);
    Vec k4 = E.eval(t0, z + da * k3);
    z += da / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!z.allFinite())
      throw DivergenceError("flow: non-finite state at step " +
                            std::to_string(s + 1));
  }
  return z;
}

Mat schouten_vb(const VectorFieldSpec& E, const BivectorField& W, double t,
                const Vec& z) {
  const int d = static_cast<int>(z.size());
  Mat Wz = W.eval(z);
  Mat J = E.jacobian ? E.jacobian(t, z) : fd_jacobian(E, t, z);
  Vec Ez = E.eval(t, z);
  std::vector<Mat> dW = fd_matrix_derivative(W.eval, z);
  Mat out = Mat::Zero(d, d);
  for (int c = 0; c < d; ++c) out += Ez[c] * dW[c];
  // - W^{cb} d_c E^a - W^{ac} d_c E^b  with J(a,c) = d_c E^a
  out -= J * Wz;             // (J * W)(a,b)   = d_c E^a W^{cb}
  out -= Wz * J.transpose(); // (W * J^T)(a,b) = W^{ac} d_c E^b
  return out;
}

Trivector schouten_bb(const BivectorField& A, const BivectorField& B,
                      const Vec& z) {
  const int d = static_cast<int>(z.size());
  Mat Az = A.eval(z);
  Mat Bz = B.eval(z);
  std::vector<Mat> dA = fd_matrix_derivative(A.eval, z);
  std::vector<Mat> dB = fd_matrix_derivative(B.eval, z);
  Trivector out(d, Mat::Zero(d, d));
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int e = 0; e < d; ++e) {
          acc += Az(e, a) * dB[e](b, c) + Bz(e, a) * dA[e](b, c);
          acc += Az(e, b) * dB[e](c, a) + Bz(e, b) * dA[e](c, a);
          acc += Az(e, c) * dB[e](a, b) + Bz(e, c) * dA[e](a, b);
        }
        out[a](b, c) = acc;
      }
  return antisymmetrize3(out);
}

Mat lie_derivative_two_form(const VectorFieldSpec& E, const TwoFormField& sigma,
                            double t, const Vec& z) {
  const int d = static_cast<int>(z.size());
  Mat sig = sigma.eval(z);
  Mat J = E.jacobian ? E.jacobian(t, z) : fd_jacobian(E, t, z);
  Vec Ez = E.eval(t, z);
  std::vector<Mat> ds = fd_matrix_derivative(sigma.eval, z);
  Mat out = Mat::Zero(d, d);
  for (int c = 0; c < d; ++c) out += Ez[c] * ds[c];
  // sigma_{cb} d_a E^c + sigma_{ac} d_b E^c  with J(c,a) = d_a E^c
  out += J.transpose() * sig;
  out += sig * J;
  return out;
}

Mat invert_bivector(const Mat& w_at_z, double inverse_sign) {
  Eigen::FullPivLU<Mat> lu(w_at_z);
  const double rcond =
      lu.rcond();  // reciprocal condition estimate from the LU factors
  if (!lu.isInvertible() || rcond < 1e-14) {
    std::ostringstream msg;
    msg << "invert_bivector: degenerate bivector, reciprocal condition "
        << rcond;
    throw ValidationError(msg.str());
  }
  return antisymmetrize(inverse_sign * lu.inverse());
}

SpectralResult spectral_invariants(const Mat& w_at_z, const Mat& sigma_at_z,
                                   int M, const Calibration& cal) {
  const int d = static_cast<int>(w_at_z.rows());
  const int n = d / 2;
  if (M > n)
    throw ValidationError("spectral_invariants: M exceeds pair count n");
  Mat R = w_at_z * sigma_at_z;
  Eigen::EigenSolver<Mat> es(R);
  if (es.info() != Eigen::Success)
    throw ValidationError("spectral_invariants: eigenvalue solve failed");
  std::vector<cplx> ev(d);
  for (int i = 0; i < d; ++i) ev[i] = es.eigenvalues()[i];
  std::sort(ev.begin(), ev.end(), [](cplx a, cplx b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  double rho = 0.0;
  for (const cplx& v : ev) rho = std::max(rho, std::abs(v));
  Vec lam(n);
  double gap = 0.0;
  for (int i = 0; i < n; ++i) {
    gap = std::max(gap, std::abs(ev[2 * i] - ev[2 * i + 1]));
    lam[i] = 0.5 * (ev[2 * i] + ev[2 * i + 1]).real();
  }
  if (gap > 1e-8 * std::max(rho, 1e-300)) {
    std::ostringstream msg;
    msg << "spectral_invariants: structure error, eigenvalues do not pair "
           "(gap "
        << gap << ", spectral radius " << rho << ")";
    throw ValidationError(msg.str());
  }
  lam *= cal.branch;
  Vec e = elementary_symmetric(lam);
  Vec Y(M);
  double scale_k = 1.0;
  for (int k = 1; k <= M; ++k) {
    scale_k *= cal.pair_scale;
    Y[k - 1] = scale_k * e[k - 1];
  }
  // Trace-contraction cross-check for k <= 2. With the doubled spectrum,
  // e_1 = tr(R)/2 and e_2 = tr(R)^2/8 - tr(R^2)/4 (branch-adjusted).
  const double tr1 = cal.branch * R.trace();
  const double tr2 = (R * R).trace();
  const double ref = std::max(1.0, std::pow(std::max(rho, 1.0), 2));
  if (M >= 1 && std::abs(cal.pair_scale * 0.5 * tr1 - Y[0]) > 1e-9 * ref)
    throw ValidationError("spectral_invariants: k=1 contraction cross-check failed");
  if (M >= 2) {
    double e2c = tr1 * tr1 / 8.0 - tr2 / 4.0;
    if (std::abs(cal.pair_scale * cal.pair_scale * e2c - Y[1]) > 1e-9 * ref)
      throw ValidationError(
          "spectral_invariants: k=2 contraction cross-check failed");
  }
  return SpectralResult{Y, lam, gap};
}

Vec newton_recurrence(const Vec& Y, RecurrenceVariant variant,
                      const Calibration& cal) {
  const int M = static_cast<int>(Y.size());
  Vec I = Vec::Zero(M);
  const double s = cal.recurrence_sign;
  for (int m = 1; m <= M; ++m) {
    double acc = ((m % 2) ? -1.0 : 1.0) * Y[m - 1];
    if (variant == RecurrenceVariant::field) acc *= m;
    double tail = 0.0;
    for (int k = 1; k <= m - 1; ++k) {
      double term = ((k % 2) ? -1.0 : 1.0) * I[m - k - 1] * Y[k - 1];
      if (variant == RecurrenceVariant::toda) term *= double(m - k) / m;
      tail += term;
    }
    I[m - 1] = s * (acc + tail);
  }
  return I;
}

Calibration calibrate_conventions(const CalibrationHooks& hooks) {
  if (hooks.states.empty())
    throw ValidationError("calibrate_conventions: no sample states");
  struct Candidate {
    Calibration cal;
    double worst;
  };
  std::vector<Candidate> all;
  for (double branch : {1.0, -1.0})
    for (double s : {1.0, -1.0})
      for (double scale : {1.0, 2.0, 0.5}) {
        Calibration cal;
        cal.branch = branch;
        cal.recurrence_sign = s;
        cal.pair_scale = scale;
        double worst = 0.0;
        bool broken = false;
        for (const Vec& z : hooks.states) {
          Mat W = hooks.bivector(z);
          Mat sig = hooks.le_omega(z);
          try {
            SpectralResult sr = spectral_invariants(W, sig, hooks.M, cal);
            Vec I = newton_recurrence(sr.Y, hooks.variant, cal);
            Vec ref = hooks.reference_integrals(z, hooks.M);
            double scale_ref = std::max(1.0, ref.cwiseAbs().maxCoeff());
            worst = std::max(worst,
                             (I - ref).cwiseAbs().maxCoeff() / scale_ref);
          } catch (const ValidationError&) {
            broken = true;
            break;
          }
        }
        if (!broken) all.push_back({cal, worst});
      }
  std::vector<Candidate> winners;
  for (const Candidate& c : all)
    if (c.worst < 1e-9) winners.push_back(c);
  if (winners.size() != 1) {
    std::ostringstream msg;
    msg << "calibrate_conventions: " << winners.size()
        << " conventions reproduce the reference integrals (need exactly 1); "
           "residuals:";
    for (const Candidate& c : all)
      msg << " [branch=" << c.cal.branch << " s=" << c.cal.recurrence_sign
          << " scale=" << c.cal.pair_scale << " err=" << c.worst << "]";
    throw CalibrationError(msg.str());
  }
  Calibration out = winners.front().cal;
  // Inverse-sign convention: the sign making the model's (W, omega) pair
  // mutual inverses in the sense W * invert_bivector(W) = sign * Id.
  out.inverse_sign = -1.0;
  if (hooks.omega) {
    const Vec& z0 = hooks.states.front();
    Mat W = hooks.bivector(z0);
    Mat om = hooks.omega(z0);
    double best = -1.0, best_err = 1e300;
    for (double sign : {1.0, -1.0}) {
      double err = (invert_bivector(W, sign) - om).cwiseAbs().maxCoeff();
      if (err < best_err) {
        best_err = err;
        best = sign;
      }
    }
    if (best_err > 1e-9)
      throw CalibrationError(
          "calibrate_conventions: neither inverse sign reproduces the "
          "canonical two-form");
    out.inverse_sign = best;
  }
  out.calibrated = true;
  return out;
}

double poisson_bracket(const std::function<double(const Vec&)>& f,
                       const std::function<double(const Vec&)>& g,
                       const BivectorField& W, const Vec& z) {
  const int d = static_cast<int>(z.size());
  const double h = fd_step(z.cwiseAbs().maxCoeff());
  Vec gf(d), gg(d);
  Vec zp = z, zm = z;
  for (int c = 0; c < d; ++c) {
    zp[c] += h;
    zm[c] -= h;
    gf[c] = (f(zp) - f(zm)) / (2.0 * h);
    gg[c] = (g(zp) - g(zm)) / (2.0 * h);
    zp[c] = z[c];
    zm[c] = z[c];
  }
  return gf.dot(W.eval(z) * gg);
}

}  // namespace binoether::exterior
