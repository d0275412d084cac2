#include "binoether/toda.hpp"

#include <cmath>
#include <memory>
#include <mutex>
#include <sstream>

namespace binoether::toda {

namespace {

void check_gaps(const Vec& q, const char* who) {
  for (int i = 0; i + 1 < q.size(); ++i)
    if (std::abs(q[i] - q[i + 1]) > 700.0) {
      std::ostringstream msg;
      msg << who << ": exponent overflow, |q_" << i + 1 << " - q_" << i + 2
          << "| > 700";
      throw DivergenceError(msg.str());
    }
}

// Interaction force F_i = eps(i-1)e^{q_{i-1}-q_i} - eps(n-i)e^{q_i-q_{i+1}},
// 1-based i.
Vec force(const Vec& q) {
  const int n = static_cast<int>(q.size());
  check_gaps(q, "toda force");
  Vec f = Vec::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (i >= 1) f[i] += std::exp(q[i - 1] - q[i]);
    if (i + 1 < n) f[i] -= std::exp(q[i] - q[i + 1]);
  }
  return f;
}

}  // namespace

TodaState make_state(Vec q, Vec p, double t) {
  if (q.size() < 1 || q.size() != p.size() || !q.allFinite() || !p.allFinite())
    throw ValidationError("TodaState: need finite q, p of equal length >= 1");
  return TodaState{std::move(q), std::move(p), t};
}

Vec pack(const TodaState& s) {
  Vec z(2 * s.n());
  z << s.q, s.p;
  return z;
}

TodaState unpack(const Vec& z, double t) {
  const int n = static_cast<int>(z.size()) / 2;
  return TodaState{z.head(n), z.tail(n), t};
}

Vec toda_rhs(const TodaState& s) { return toda_rhs_z(s.n(), pack(s)); }

Vec toda_rhs_z(int n, const Vec& z) {
  Vec out(2 * n);
  out.head(n) = z.tail(n);
  out.tail(n) = force(z.head(n));
  return out;
}

double toda_hamiltonian(const TodaState& s) {
  check_gaps(s.q, "toda_hamiltonian");
  double h = 0.5 * s.p.squaredNorm();
  for (int i = 0; i + 1 < s.n(); ++i) h += std::exp(s.q[i] - s.q[i + 1]);
  return h;
}

Vec toda_generator(const TodaState& s) {
  return toda_generator_z(s.n(), pack(s), s.t);
}

Vec toda_generator_z(int n, const Vec& z, double t) {
  check_gaps(z.head(n), "toda_generator");
  const auto q = z.head(n);
  const auto p = z.tail(n);
  Vec out(2 * n);
  for (int i = 1; i <= n; ++i) {
    const double em = i >= 2 ? std::exp(q[i - 2] - q[i - 1]) : 0.0;
    const double ep = i <= n - 1 ? std::exp(q[i - 1] - q[i]) : 0.0;
    const double pm = i >= 2 ? p[i - 2] : 0.0;
    const double pp = i <= n - 1 ? p[i] : 0.0;
    const double el = eps_sign(i - 1);
    const double er = eps_sign(n - i);
    double sum_before = 0.0, sum_after = 0.0;
    for (int k = 0; k < i - 1; ++k) sum_before += p[k];
    for (int k = i; k < n; ++k) sum_after += p[k];
    out[i - 1] = (n - i + 1) * p[i - 1] - 0.5 * sum_before + 0.5 * sum_after +
                 0.5 * t * (p[i - 1] * p[i - 1] + el * em + er * ep);
    out[n + i - 1] = 0.5 * p[i - 1] * p[i - 1] + el * (n - i + 2) * em -
                     er * (n - i) * ep +
                     0.5 * t *
                         (el * (pm + p[i - 1]) * em - er * (p[i - 1] + pp) * ep);
  }
  return out;
}

Mat toda_generator_jacobian(int n, const Vec& z, double t) {
  const auto q = z.head(n);
  const auto p = z.tail(n);
  Mat J = Mat::Zero(2 * n, 2 * n);
  for (int i = 1; i <= n; ++i) {
    const double em = i >= 2 ? std::exp(q[i - 2] - q[i - 1]) : 0.0;
    const double ep = i <= n - 1 ? std::exp(q[i - 1] - q[i]) : 0.0;
    const double pm = i >= 2 ? p[i - 2] : 0.0;
    const double pp = i <= n - 1 ? p[i] : 0.0;
    const int a = i - 1;      // row of E(q_i)
    const int b = n + i - 1;  // row of E(p_i)
    J(a, n + i - 1) += (n - i + 1) + t * p[i - 1];
    for (int k = 1; k < i; ++k) J(a, n + k - 1) += -0.5;
    for (int k = i + 1; k <= n; ++k) J(a, n + k - 1) += 0.5;
    if (i >= 2) {
      J(a, i - 2) += 0.5 * t * em;
      J(a, i - 1) += -0.5 * t * em;
      const double c = (n - i + 2) + 0.5 * t * (pm + p[i - 1]);
      J(b, i - 2) += c * em;
      J(b, i - 1) += -c * em;
      J(b, n + i - 2) += 0.5 * t * em;
      J(b, n + i - 1) += 0.5 * t * em;
    }
    if (i <= n - 1) {
      J(a, i - 1) += 0.5 * t * ep;
      J(a, i) += -0.5 * t * ep;
      const double c = -(n - i) - 0.5 * t * (p[i - 1] + pp);
      J(b, i - 1) += c * ep;
      J(b, i) += -c * ep;
      J(b, n + i - 1) += -0.5 * t * ep;
      J(b, n + i) += -0.5 * t * ep;
    }
    J(b, n + i - 1) += p[i - 1];
  }
  return J;
}

std::vector<Mat> toda_generator_hessian(int n, const Vec& z, double t) {
  const auto q = z.head(n);
  const auto p = z.tail(n);
  std::vector<Mat> H(2 * n, Mat::Zero(2 * n, 2 * n));
  auto add_qq = [&](int row, double coef, int jm, int jp) {
    const std::pair<int, double> idx[2] = {{jm, 1.0}, {jp, -1.0}};
    for (const auto& [j, sj] : idx)
      for (const auto& [k, sk] : idx) H[row](j, k) += coef * sj * sk;
  };
  for (int i = 1; i <= n; ++i) {
    const double em = i >= 2 ? std::exp(q[i - 2] - q[i - 1]) : 0.0;
    const double ep = i <= n - 1 ? std::exp(q[i - 1] - q[i]) : 0.0;
    const double pm = i >= 2 ? p[i - 2] : 0.0;
    const double pp = i <= n - 1 ? p[i] : 0.0;
    const int a = i - 1;
    const int b = n + i - 1;
    H[a](n + i - 1, n + i - 1) += t;
    if (i >= 2) {
      add_qq(a, 0.5 * t * em, i - 2, i - 1);
      add_qq(b, ((n - i + 2) + 0.5 * t * (pm + p[i - 1])) * em, i - 2, i - 1);
      const std::pair<int, double> idx[2] = {{i - 2, 1.0}, {i - 1, -1.0}};
      for (const auto& [j, sj] : idx)
        for (int kp : {n + i - 2, n + i - 1}) {
          H[b](j, kp) += 0.5 * t * em * sj;
          H[b](kp, j) += 0.5 * t * em * sj;
        }
    }
    if (i <= n - 1) {
      add_qq(a, 0.5 * t * ep, i - 1, i);
      add_qq(b, (-(n - i) - 0.5 * t * (p[i - 1] + pp)) * ep, i - 1, i);
      const std::pair<int, double> idx[2] = {{i - 1, 1.0}, {i, -1.0}};
      for (const auto& [j, sj] : idx)
        for (int kp : {n + i - 1, n + i}) {
          H[b](j, kp) += -0.5 * t * ep * sj;
          H[b](kp, j) += -0.5 * t * ep * sj;
        }
    }
    H[b](n + i - 1, n + i - 1) += 1.0;
  }
  return H;
}

exterior::VectorFieldSpec generator_field(int n) {
  exterior::VectorFieldSpec spec;
  spec.eval = [n](double t, const Vec& z) { return toda_generator_z(n, z, t); };
  spec.time_dependent = true;
  spec.jacobian = [n](double t, const Vec& z) {
    return toda_generator_jacobian(n, z, t);
  };
  spec.hessian = [n](double t, const Vec& z) {
    return toda_generator_hessian(n, z, t);
  };
  return spec;
}

exterior::VectorFieldSpec rhs_field(int n) {
  exterior::VectorFieldSpec spec;
  spec.eval = [n](double, const Vec& z) { return toda_rhs_z(n, z); };
  spec.time_dependent = false;
  return spec;
}

Mat canonical_W(int n) {
  Mat W = Mat::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    W(n + i, i) = 1.0;
    W(i, n + i) = -1.0;
  }
  return W;
}

Mat canonical_omega(int n) { return canonical_W(n); }

Mat toda_LEomega(const TodaState& s) {
  const int n = s.n();
  check_gaps(s.q, "toda_LEomega");
  Mat out = Mat::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    out(n + i, i) += s.p[i];
    out(i, n + i) -= s.p[i];
  }
  for (int i = 0; i + 1 < n; ++i) {
    const double g = std::exp(s.q[i] - s.q[i + 1]);
    out(i, i + 1) += g;
    out(i + 1, i) -= g;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      out(n + i, n + j) += 1.0;
      out(n + j, n + i) -= 1.0;
    }
  return out;
}

ResidualReport toda_symmetry_residual(const TodaTrajectory& traj,
                                      double perturbation) {
  const int n = traj.n;
  const int K = static_cast<int>(traj.states.size());
  if (K < 5)
    throw ValidationError(
        "toda_symmetry_residual: stencil needs at least 5 snapshots");
  ResidualReport rep;
  rep.coarse_dt_warning = traj.dt > 1e-2;
  std::vector<Vec> Ev(K);
  for (int k = 0; k < K; ++k) {
    Ev[k] = toda_generator_z(n, traj.states[k], traj.times[k]);
    if (perturbation != 0.0)
      Ev[k].head(n) += perturbation * traj.states[k].head(n);
  }
  const double h = traj.dt;
  for (int k = 2; k + 2 < K; ++k) {
    Vec dE = (-Ev[k + 2] + 8.0 * Ev[k + 1] - 8.0 * Ev[k - 1] + Ev[k - 2]) /
             (12.0 * h);
    const auto q = traj.states[k].head(n);
    const Vec Eq = Ev[k].head(n);
    Vec lin = Vec::Zero(n);
    for (int i = 1; i <= n; ++i) {
      const double em = i >= 2 ? std::exp(q[i - 2] - q[i - 1]) : 0.0;
      const double ep = i <= n - 1 ? std::exp(q[i - 1] - q[i]) : 0.0;
      const double Eqm = i >= 2 ? Eq[i - 2] : 0.0;
      const double Eqp = i <= n - 1 ? Eq[i] : 0.0;
      lin[i - 1] = eps_sign(i - 1) * em * (Eqm - Eq[i - 1]) -
                   eps_sign(n - i) * ep * (Eq[i - 1] - Eqp);
    }
    const double r1 = (dE.head(n) - Ev[k].tail(n)).cwiseAbs().maxCoeff();
    const double r2 = (dE.tail(n) - lin).cwiseAbs().maxCoeff();
    rep.times.push_back(traj.times[k]);
    rep.r1.push_back(r1);
    rep.r2.push_back(r2);
    rep.max_r1 = std::max(rep.max_r1, r1);
    rep.max_r2 = std::max(rep.max_r2, r2);
  }
  return rep;
}

Vec toda_integrals_closed(const TodaState& s, int M) {
  if (M < 1 || M > 4)
    throw ValidationError("toda_integrals_closed: closed forms cover M in 1..4");
  check_gaps(s.q, "toda_integrals_closed");
  const int n = s.n();
  const Vec& p = s.p;
  Vec g = Vec::Zero(std::max(0, n - 1));
  for (int i = 0; i + 1 < n; ++i) g[i] = std::exp(s.q[i] - s.q[i + 1]);
  Vec I = Vec::Zero(M);
  I[0] = p.sum();
  if (M >= 2) I[1] = 0.5 * p.squaredNorm() + g.sum();
  if (M >= 3) {
    double v = p.array().cube().sum() / 3.0;
    for (int i = 0; i + 1 < n; ++i) v += (p[i] + p[i + 1]) * g[i];
    I[2] = v;
  }
  if (M >= 4) {
    double v = p.array().pow(4).sum() / 4.0;
    for (int i = 0; i + 1 < n; ++i)
      v += (p[i] * p[i] + p[i] * p[i + 1] + p[i + 1] * p[i + 1]) * g[i] +
           0.5 * g[i] * g[i];
    for (int i = 0; i + 2 < n; ++i) v += std::exp(s.q[i] - s.q[i + 2]);
    I[3] = v;
  }
  return I;
}

Mat lax_matrix(const TodaState& s) {
  const int n = s.n();
  Mat L = Mat::Zero(n, n);
  L.diagonal() = s.p;
  for (int i = 0; i + 1 < n; ++i) {
    const double a = std::exp(0.5 * (s.q[i] - s.q[i + 1]));
    L(i, i + 1) = a;
    L(i + 1, i) = a;
  }
  return L;
}

Vec lax_trace_oracle(const TodaState& s, int M) {
  Mat L = lax_matrix(s);
  Mat P = Mat::Identity(s.n(), s.n());
  Vec I(M);
  for (int m = 1; m <= M; ++m) {
    P = P * L;
    I[m - 1] = P.trace() / m;
  }
  return I;
}

TodaTrajectory integrate_toda(const TodaState& s0, double dt, double T,
                              Method method) {
  if (dt <= 0.0) throw ValidationError("integrate_toda: dt must be positive");
  const int n = s0.n();
  const int steps = static_cast<int>(std::llround(T / dt));
  TodaTrajectory traj;
  traj.method = method;
  traj.dt = dt;
  traj.n = n;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  Vec z = pack(s0);
  traj.times.push_back(s0.t);
  traj.states.push_back(z);
  auto guard = [&](int step) {
    if (!z.allFinite()) {
      std::ostringstream msg;
      msg << "integrate_toda: divergence at t = " << s0.t + (step + 1) * dt;
      throw DivergenceError(msg.str());
    }
  };
  try {
    for (int s = 0; s < steps; ++s) {
      if (method == Method::leapfrog) {
        auto q = z.head(n);
        auto p = z.tail(n);
        p += 0.5 * dt * force(q);
        q += dt * p;
        p += 0.5 * dt * force(q);
      } else {
        Vec k1 = toda_rhs_z(n, z);
        Vec k2 = toda_rhs_z(n, z + 0.5 * dt * k1);
        Vec k3 = toda_rhs_z(n, z + 0.5 * dt * k2);
        Vec k4 = toda_rhs_z(n, z + dt * k3);
        z += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      }
      guard(s);
      traj.times.push_back(s0.t + (s + 1) * dt);
      traj.states.push_back(z);
    }
  } catch (const DivergenceError& e) {
    std::ostringstream msg;
    msg << e.what() << " (t = " << traj.times.back() + dt << ")";
    throw DivergenceError(msg.str());
  }
  return traj;
}

NonNoetherReport verify_nonnoether_field(const exterior::VectorFieldSpec& E,
                                         int n, double t, const Vec& z) {
  const Mat W = canonical_W(n);
  auto W_field = exterior::BivectorField::constant(W);

  std::function<Mat(const Vec&)> S_fn = [&E, &W_field, t](const Vec& zz) {
    return exterior::schouten_vb(E, W_field, t, zz);
  };

  std::function<Mat(const Vec&)> T_fn;
  if (E.jacobian && E.hessian) {
    // Analytic route: S = -(J W) - (W J^T); d_d S = -(H_d W) - (W H_d^T).
    T_fn = [&E, W, n, t](const Vec& zz) {
      const int d = 2 * n;
      Mat J = E.jacobian(t, zz);
      std::vector<Mat> H = E.hessian(t, zz);
      Mat S = -(J * W) - (W * J.transpose());
      Vec Ez = E.eval(t, zz);
      Mat out = Mat::Zero(d, d);
      for (int dd = 0; dd < d; ++dd) {
        Mat Hd(d, d);  // Hd(a,c) = d_dd d_c E^a
        for (int a = 0; a < d; ++a) Hd.row(a) = H[a].col(dd).transpose();
        Mat dS = -(Hd * W) - (W * Hd.transpose());
        out += Ez[dd] * dS;
      }
      out -= J * S;
      out -= S * J.transpose();
      return out;
    };
  } else {
    T_fn = [&E, S_fn, t](const Vec& zz) {
      const int d = static_cast<int>(zz.size());
      const double h = fd_step(zz.cwiseAbs().maxCoeff());
      Mat S = S_fn(zz);
      Mat J(d, d);
      Vec zp = zz, zm = zz;
      for (int c = 0; c < d; ++c) {
        zp[c] += h;
        zm[c] -= h;
        J.col(c) = (E.eval(t, zp) - E.eval(t, zm)) / (2.0 * h);
        zp[c] = zz[c];
        zm[c] = zz[c];
      }
      Vec Ez = E.eval(t, zz);
      Mat out = Mat::Zero(d, d);
      Vec zp2 = zz, zm2 = zz;
      for (int c = 0; c < d; ++c) {
        zp2[c] += h;
        zm2[c] -= h;
        out += Ez[c] * ((S_fn(zp2) - S_fn(zm2)) / (2.0 * h));
        zp2[c] = zz[c];
        zm2[c] = zz[c];
      }
      out -= J * S;
      out -= S * J.transpose();
      return out;
    };
  }

  auto T_field = exterior::BivectorField::make(T_fn);
  auto YB = exterior::schouten_bb(T_field, W_field, z);

  NonNoetherReport rep;
  rep.ew_norm = S_fn(z).cwiseAbs().maxCoeff();
  const double t_norm = T_fn(z).cwiseAbs().maxCoeff();
  rep.yb_scaled = exterior::trivector_max_abs(YB) / (1.0 + t_norm);
  rep.nonnoether = rep.ew_norm > 1e-3;
  rep.yang_baxter = rep.yb_scaled < 1e-6;
  return rep;
}

NonNoetherReport toda_verify_nonnoether(const TodaState& s, double t) {
  return verify_nonnoether_field(generator_field(s.n()), s.n(), t, pack(s));
}

exterior::VectorFieldSpec cubic_control_field(int n, Rng& rng) {
  const int d = 2 * n;
  auto A = std::make_shared<std::vector<Mat>>();
  A->reserve(d * d);
  for (int i = 0; i < d * d; ++i) {
    Mat m(d, d);
    for (int r = 0; r < d; ++r)
      for (int c = 0; c < d; ++c) m(r, c) = 0.3 * rng.normal();
    A->push_back(m);
  }
  exterior::VectorFieldSpec spec;
  spec.eval = [A, d](double, const Vec& z) {
    Vec out = Vec::Zero(d);
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) out[a] += z[b] * z.dot((*A)[a * d + b] * z);
    return out;
  };
  spec.time_dependent = false;
  return spec;
}

const exterior::Calibration& calibration() {
  static exterior::Calibration cal = [] {
    Rng rng(20240001);
    exterior::CalibrationHooks hooks;
    const int n = 3;
    for (int i = 0; i < 10; ++i) hooks.states.push_back(pack(random_state(n, rng)));
    hooks.bivector = [n](const Vec&) { return canonical_W(n); };
    hooks.omega = [n](const Vec&) { return canonical_omega(n); };
    hooks.le_omega = [n](const Vec& z) { return toda_LEomega(unpack(z)); };
    hooks.reference_integrals = [](const Vec& z, int M) {
      return toda_integrals_closed(unpack(z), M);
    };
    hooks.M = 3;
    hooks.variant = exterior::RecurrenceVariant::toda;
    return exterior::calibrate_conventions(hooks);
  }();
  return cal;
}

TodaState random_state(int n, Rng& rng) {
  return TodaState{rng.uniform_vec(n, -1.0, 1.0), rng.uniform_vec(n, -1.0, 1.0),
                   0.0};
}

}  // namespace binoether::toda
