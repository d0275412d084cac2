#include "binoether/pdemodels.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

namespace binoether::pdemodels {

using fieldkit::Anchor;
using fieldkit::Grid;
using fieldkit::Structure;
using fieldkit::TwoFormKind;

namespace {

Vec dxo(const Grid& g, const Vec& f, int order) {
  return fieldkit::spectral_derivative(g, f, order);
}

CVec dxo(const Grid& g, const CVec& f, int order) {
  return fieldkit::spectral_derivative(g, f, order);
}

Vec antider(const Grid& g, const Vec& f) {
  return fieldkit::antiderivative(g, f, Anchor::left_anchored);
}

void require_real(Kind k, const char* who) {
  if (is_complex_kind(k))
    throw ValidationError(std::string(who) + ": " + kind_name(k) +
                          " acts on complex fields");
}

void require_complex(Kind k, const char* who) {
  if (!is_complex_kind(k))
    throw ValidationError(std::string(who) + ": " + kind_name(k) +
                          " acts on real fields");
}

void require_size(const Grid& g, Eigen::Index n, const char* who) {
  if (n != g.N)
    throw ValidationError(std::string(who) + ": field size does not match "
                          "grid");
}

}  // namespace

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::nse:
      return "nse";
    case Kind::kdv:
      return "kdv";
    default:
      return "mkdv";
  }
}

bool is_complex_kind(Kind k) { return k == Kind::nse; }

double default_dt(Kind k) { return k == Kind::nse ? 1e-4 : 2.5e-4; }

ModelSpec ModelSpec::make(Kind k, const Grid& g, double dt) {
  if (dt == 0.0) dt = default_dt(k);
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw ValidationError("ModelSpec: dt must be positive and finite");
  return ModelSpec{k, g, dt};
}

Vec rhs(Kind k, const Grid& g, const Vec& u) {
  require_real(k, "rhs");
  require_size(g, u.size(), "rhs");
  const Vec ux = dxo(g, u, 1);
  const Vec uxxx = dxo(g, u, 3);
  if (k == Kind::kdv) return -(uxxx + u.cwiseProduct(ux));
  return -(uxxx - 6.0 * u.cwiseProduct(u).cwiseProduct(ux));
}

CVec rhs(Kind k, const Grid& g, const CVec& psi) {
  require_complex(k, "rhs");
  require_size(g, psi.size(), "rhs");
  const CVec pxx = dxo(g, psi, 2);
  CVec out(g.N);
  for (int j = 0; j < g.N; ++j)
    out[j] = cplx(0.0, 1.0) *
             (pxx[j] + 2.0 * psi[j] * psi[j] * std::conj(psi[j]));
  return out;
}

Vec linearized_rhs(Kind k, const Grid& g, const Vec& u, const Vec& E) {
  require_real(k, "linearized_rhs");
  require_size(g, u.size(), "linearized_rhs");
  require_size(g, E.size(), "linearized_rhs");
  const Vec Ex = dxo(g, E, 1);
  const Vec Exxx = dxo(g, E, 3);
  if (k == Kind::kdv) {
    const Vec ux = dxo(g, u, 1);
    return -(Exxx + ux.cwiseProduct(E) + u.cwiseProduct(Ex));
  }
  const Vec ux = dxo(g, u, 1);
  const Vec u2 = u.cwiseProduct(u);
  return -(Exxx - 12.0 * u.cwiseProduct(ux).cwiseProduct(E) -
           6.0 * u2.cwiseProduct(Ex));
}

CVec linearized_rhs(Kind k, const Grid& g, const CVec& psi, const CVec& E) {
  require_complex(k, "linearized_rhs");
  require_size(g, psi.size(), "linearized_rhs");
  require_size(g, E.size(), "linearized_rhs");
  const CVec Exx = dxo(g, E, 2);
  CVec out(g.N);
  for (int j = 0; j < g.N; ++j) {
    const cplx p = psi[j];
    out[j] = cplx(0.0, 1.0) *
             (Exx[j] + 2.0 * p * p * std::conj(E[j]) +
              4.0 * p * std::conj(p) * E[j]);
  }
  return out;
}

namespace {

long long step_count(double T, double dt, const char* who) {
  if (!(T > 0.0) || !std::isfinite(T))
    throw ValidationError(std::string(who) + ": T must be positive");
  const long long steps = std::llround(T / dt);
  if (steps < 1)
    throw ValidationError(std::string(who) + ": T shorter than one step");
  return steps;
}

[[noreturn]] void blow_up(Kind k, double t) {
  std::ostringstream msg;
  msg << "integrate(" << kind_name(k) << "): norm blow-up at t = " << t;
  throw DivergenceError(msg.str());
}

}  // namespace

PdeTrajectory integrate(const ModelSpec& spec, const Vec& u0, double T,
                        int stride) {
  require_real(spec.kind, "integrate");
  require_size(spec.grid, u0.size(), "integrate");
  if (stride < 1) throw ValidationError("integrate: stride must be >= 1");
  const Grid& g = spec.grid;
  const double dt = spec.dt;
  const long long steps = step_count(T, dt, "integrate");
  const Vec kk = g.wavenumbers();

  CVec E1(g.N), E2(g.N), ik(g.N);
  for (int j = 0; j < g.N; ++j) {
    const cplx sym(0.0, kk[j] * kk[j] * kk[j]);
    E1[j] = std::exp(sym * (dt / 2.0));
    E2[j] = E1[j] * E1[j];
    ik[j] = cplx(0.0, kk[j]);
  }
  ik[g.N / 2] = 0.0;

  const bool is_kdv = spec.kind == Kind::kdv;
  auto Nk = [&](const CVec& w) {
    const Vec u = fieldkit::ifft(w).real();
    const Vec ux = fieldkit::ifft(CVec(ik.cwiseProduct(w))).real();
    Vec nl(g.N);
    if (is_kdv)
      nl = -u.cwiseProduct(ux);
    else
      nl = 6.0 * u.cwiseProduct(u).cwiseProduct(ux);
    return fieldkit::fft(nl.cast<cplx>());
  };

  PdeTrajectory traj;
  traj.grid = g;
  traj.dt = dt;
  traj.stride = stride;
  traj.scheme = "ifrk4";
  traj.is_complex = false;
  traj.times.push_back(0.0);
  traj.real_snapshots.push_back(u0);

  CVec uk = fieldkit::fft(u0.cast<cplx>());
  const double ref_norm = std::max(1.0, uk.norm());
  for (long long s = 1; s <= steps; ++s) {
    const CVec a = Nk(uk);
    const CVec b = Nk(CVec(E1.cwiseProduct(uk + (dt / 2.0) * a)));
    const CVec c = Nk(CVec(E1.cwiseProduct(uk) + (dt / 2.0) * b));
    const CVec d = Nk(CVec(E2.cwiseProduct(uk) + dt * E1.cwiseProduct(c)));
    uk = E2.cwiseProduct(uk) +
         (dt / 6.0) * (E2.cwiseProduct(a) + 2.0 * E1.cwiseProduct(b + c) + d);
    if (!uk.allFinite() || uk.norm() > 1e6 * ref_norm) blow_up(spec.kind, s * dt);
    if (s % stride == 0 || s == steps) {
      traj.times.push_back(s * dt);
      traj.real_snapshots.push_back(fieldkit::ifft(uk).real());
    }
  }
  return traj;
}

PdeTrajectory integrate(const ModelSpec& spec, const CVec& psi0, double T,
                        int stride) {
  require_complex(spec.kind, "integrate");
  require_size(spec.grid, psi0.size(), "integrate");
  if (stride < 1) throw ValidationError("integrate: stride must be >= 1");
  const Grid& g = spec.grid;
  const double dt = spec.dt;
  const long long steps = step_count(T, dt, "integrate");
  const Vec kk = g.wavenumbers();

  CVec lin(g.N);
  for (int j = 0; j < g.N; ++j)
    lin[j] = std::exp(cplx(0.0, -kk[j] * kk[j] * dt));

  PdeTrajectory traj;
  traj.grid = g;
  traj.dt = dt;
  traj.stride = stride;
  traj.scheme = "strang";
  traj.is_complex = true;
  traj.times.push_back(0.0);
  traj.complex_snapshots.push_back(psi0);

  CVec p = psi0;
  const double ref_norm = std::max(1.0, p.norm());
  auto half_phase = [&](CVec& w) {
    for (int j = 0; j < g.N; ++j)
      w[j] *= std::exp(cplx(0.0, 2.0 * std::norm(w[j]) * (dt / 2.0)));
  };
  for (long long s = 1; s <= steps; ++s) {
    half_phase(p);
    p = fieldkit::ifft(CVec(lin.cwiseProduct(fieldkit::fft(p))));
    half_phase(p);
    if (!p.allFinite() || p.norm() > 1e6 * ref_norm) blow_up(spec.kind, s * dt);
    if (s % stride == 0 || s == steps) {
      traj.times.push_back(s * dt);
      traj.complex_snapshots.push_back(p);
    }
  }
  return traj;
}

double tail_fraction(const Grid& g, const Vec& u) {
  require_size(g, u.size(), "tail_fraction");
  const Vec xs = g.x();
  double total = 0.0, outside = 0.0;
  for (int j = 0; j < g.N; ++j) {
    const double m = u[j] * u[j];
    total += m;
    if (std::abs(xs[j]) > g.L / 4.0) outside += m;
  }
  return total > 0.0 ? outside / total : 0.0;
}

double tail_fraction(const Grid& g, const CVec& psi) {
  require_size(g, psi.size(), "tail_fraction");
  const Vec xs = g.x();
  double total = 0.0, outside = 0.0;
  for (int j = 0; j < g.N; ++j) {
    const double m = std::norm(psi[j]);
    total += m;
    if (std::abs(xs[j]) > g.L / 4.0) outside += m;
  }
  return total > 0.0 ? outside / total : 0.0;
}

namespace {

void tail_guard(const Grid& g, double frac, const char* who) {
  if (frac > 1e-8) {
    std::ostringstream msg;
    msg << who << ": boundary tail mass fraction " << frac
        << " exceeds 1e-8; the x-weighted terms need data vanishing well "
           "inside the box (L = "
        << g.L << ")";
    throw ValidationError(msg.str());
  }
}

}  // namespace

Vec generator(Kind k, const Grid& g, const Vec& u, double t) {
  require_real(k, "generator");
  require_size(g, u.size(), "generator");
  tail_guard(g, tail_fraction(g, u), "generator");
  const Vec xs = g.x();
  const Vec ux = dxo(g, u, 1);
  if (k == Kind::kdv) {
    const Vec uxx = dxo(g, u, 2);
    const Vec uxxx = dxo(g, u, 3);
    const Vec u5 = dxo(g, u, 5);
    const Vec v = antider(g, u);
    Vec out(g.N);
    for (int j = 0; j < g.N; ++j) {
      const double uj = u[j];
      out[j] = 0.5 * uxx[j] + uj * uj / 6.0 + ux[j] * v[j] / 24.0 +
               xs[j] / 8.0 * (uxxx[j] + uj * ux[j]) -
               t / 16.0 * (6.0 * u5[j] + 20.0 * ux[j] * uxx[j] +
                           10.0 * uj * uxxx[j] + 5.0 * uj * uj * ux[j]);
    }
    return out;
  }
  const Vec uxx = dxo(g, u, 2);
  const Vec uxxx = dxo(g, u, 3);
  const Vec u5 = dxo(g, u, 5);
  const Vec w = antider(g, Vec(u.cwiseProduct(u)));
  Vec out(g.N);
  for (int j = 0; j < g.N; ++j) {
    const double uj = u[j];
    const double uxj = ux[j];
    out[j] = -1.5 * uxx[j] + 2.0 * uj * uj * uj + uxj * w[j] -
             xs[j] / 2.0 * (uxxx[j] - 6.0 * uj * uj * uxj) +
             1.5 * t *
                 (u5[j] - 10.0 * uj * uj * uxxx[j] -
                  40.0 * uj * uxj * uxx[j] - 10.0 * uxj * uxj * uxj +
                  30.0 * uj * uj * uj * uj * uxj);
  }
  return out;
}

CVec generator(Kind k, const Grid& g, const CVec& psi, double t) {
  require_complex(k, "generator");
  require_size(g, psi.size(), "generator");
  tail_guard(g, tail_fraction(g, psi), "generator");
  const Vec xs = g.x();
  Vec density(g.N);
  for (int j = 0; j < g.N; ++j) density[j] = std::norm(psi[j]);
  const Vec phi = antider(g, density);
  const CVec px = dxo(g, psi, 1);
  const CVec pxx = dxo(g, psi, 2);
  const CVec pxxx = dxo(g, psi, 3);
  CVec out(g.N);
  for (int j = 0; j < g.N; ++j) {
    const cplx p = psi[j];
    out[j] = cplx(0.0, 1.0) * (px[j] + xs[j] / 2.0 * pxx[j] + p * phi[j] +
                               xs[j] * p * p * std::conj(p)) -
             t * (pxxx[j] + 6.0 * p * std::conj(p) * px[j]);
  }
  return out;
}

namespace {

struct StencilContext {
  std::vector<int> interior;
  double h = 0.0;
};

StencilContext stencil_context(const ModelSpec& spec,
                               const PdeTrajectory& traj, const char* who) {
  if (!fieldkit::same_grid(spec.grid, traj.grid))
    throw ValidationError(std::string(who) + ": trajectory grid mismatch");
  const std::size_t K =
      traj.is_complex ? traj.complex_snapshots.size()
                      : traj.real_snapshots.size();
  if (K != traj.times.size())
    throw ValidationError(std::string(who) + ": trajectory is inconsistent");
  if (K < 5)
    throw ValidationError(std::string(who) +
                          ": need at least 5 recorded snapshots");
  StencilContext ctx;
  ctx.h = traj.times[1] - traj.times[0];
  if (!(ctx.h > 0.0))
    throw ValidationError(std::string(who) + ": snapshot times must increase");
  const Vec xs = spec.grid.x();
  for (int j = 0; j < spec.grid.N; ++j)
    if (std::abs(xs[j]) <= spec.grid.L / 4.0) ctx.interior.push_back(j);
  return ctx;
}

bool uniform_here(const PdeTrajectory& traj, std::size_t kk, double h) {
  for (int o = -2; o <= 2; ++o) {
    const double expect = traj.times[kk] + o * h;
    if (std::abs(traj.times[kk + o] - expect) >
        1e-9 * std::max(1.0, std::abs(expect)))
      return false;
  }
  return true;
}

template <typename Field>
ResidualReport residual_impl(
    const ModelSpec& spec, const PdeTrajectory& traj,
    const std::vector<Field>& snaps,
    const std::function<Field(const Field&, double)>& gen, double t_min,
    double t_max, const char* who) {
  const StencilContext ctx = stencil_context(spec, traj, who);
  ResidualReport rep;
  rep.coarse_dt_warning = spec.dt > 1e-3;
  std::map<std::size_t, Field> cache;
  auto gen_at = [&](std::size_t idx) -> const Field& {
    auto it = cache.find(idx);
    if (it == cache.end())
      it = cache.emplace(idx, gen(snaps[idx], traj.times[idx])).first;
    return it->second;
  };
  const std::size_t K = snaps.size();
  for (std::size_t kk = 2; kk + 2 < K; ++kk) {
    const double t = traj.times[kk];
    if (t < t_min - 1e-12 || t > t_max + 1e-12) continue;
    if (!uniform_here(traj, kk, ctx.h)) {
      rep.skipped.emplace_back(t, "nonuniform snapshot spacing at stencil");
      continue;
    }
    bool guarded = false;
    for (int o = -2; o <= 2 && !guarded; ++o)
      if (tail_fraction(spec.grid, snaps[kk + o]) > 1e-8) guarded = true;
    if (guarded) {
      rep.skipped.emplace_back(t, "tail mass fraction above 1e-8");
      continue;
    }
    const Field dE = (-gen_at(kk + 2) + 8.0 * gen_at(kk + 1) -
                      8.0 * gen_at(kk - 1) + gen_at(kk - 2)) /
                     (12.0 * ctx.h);
    const Field lin =
        linearized_rhs(spec.kind, spec.grid, snaps[kk], gen_at(kk));
    const Field diff = dE - lin;
    double worst = 0.0;
    for (int j : ctx.interior)
      worst = std::max(worst, std::abs(diff[j]));
    rep.samples.push_back({t, worst});
    rep.max_residual = std::max(rep.max_residual, worst);
  }
  if (rep.samples.empty()) {
    std::ostringstream msg;
    msg << who << ": no admissible sample times in [" << t_min << ", "
        << t_max << "]";
    for (const auto& [t, why] : rep.skipped) msg << "; t=" << t << ": " << why;
    throw ValidationError(msg.str());
  }
  return rep;
}

}  // namespace

ResidualReport linearized_residual(const ModelSpec& spec,
                                   const PdeTrajectory& traj,
                                   double perturbation, double t_min,
                                   double t_max) {
  if (is_complex_kind(spec.kind)) {
    if (!traj.is_complex)
      throw ValidationError("linearized_residual: trajectory kind mismatch");
    const Kind k = spec.kind;
    const Grid g = spec.grid;
    std::function<CVec(const CVec&, double)> gen =
        [k, g, perturbation](const CVec& p, double t) {
          CVec E = generator(k, g, p, t);
          if (perturbation != 0.0) E += perturbation * p;
          return E;
        };
    return residual_impl<CVec>(spec, traj, traj.complex_snapshots, gen, t_min,
                               t_max, "linearized_residual");
  }
  if (traj.is_complex)
    throw ValidationError("linearized_residual: trajectory kind mismatch");
  const Kind k = spec.kind;
  const Grid g = spec.grid;
  std::function<Vec(const Vec&, double)> gen =
      [k, g, perturbation](const Vec& u, double t) {
        Vec E = generator(k, g, u, t);
        if (perturbation != 0.0) E += perturbation * u;
        return E;
      };
  return residual_impl<Vec>(spec, traj, traj.real_snapshots, gen, t_min,
                            t_max, "linearized_residual");
}

ResidualReport linearized_residual_custom(const ModelSpec& spec,
                                          const PdeTrajectory& traj,
                                          const RealGenerator& gen,
                                          double t_min, double t_max) {
  require_real(spec.kind, "linearized_residual_custom");
  if (traj.is_complex)
    throw ValidationError("linearized_residual_custom: trajectory kind "
                          "mismatch");
  const Grid g = spec.grid;
  std::function<Vec(const Vec&, double)> wrapped =
      [&gen, g](const Vec& u, double t) { return gen(g, u, t); };
  return residual_impl<Vec>(spec, traj, traj.real_snapshots, wrapped, t_min,
                            t_max, "linearized_residual_custom");
}

ResidualReport linearized_residual_custom(const ModelSpec& spec,
                                          const PdeTrajectory& traj,
                                          const ComplexGenerator& gen,
                                          double t_min, double t_max) {
  require_complex(spec.kind, "linearized_residual_custom");
  if (!traj.is_complex)
    throw ValidationError("linearized_residual_custom: trajectory kind "
                          "mismatch");
  const Grid g = spec.grid;
  std::function<CVec(const CVec&, double)> wrapped =
      [&gen, g](const CVec& p, double t) { return gen(g, p, t); };
  return residual_impl<CVec>(spec, traj, traj.complex_snapshots, wrapped,
                             t_min, t_max, "linearized_residual_custom");
}

// ===== ladder functionals =====

fieldkit::Functional invariant_functional(Kind k, int m) {
  require_real(k, "invariant_functional");
  if (m < 1 || m > 4)
    throw ValidationError("invariant_functional: m must lie in 1..4");
  fieldkit::Functional F;
  F.name = std::string(kind_name(k)) + ".I" + std::to_string(m);
  if (k == Kind::kdv) {
    switch (m) {
      case 1:
        F.eval = [](const Grid& g, const Vec& u) {
          return 2.0 / 3.0 * fieldkit::quadrature(g, u);
        };
        F.el_gradient = [](const Grid& g, const Vec&) {
          return Vec(Vec::Constant(g.N, 2.0 / 3.0));
        };
        break;
      case 2:
        F.eval = [](const Grid& g, const Vec& u) {
          return 4.0 / 9.0 * fieldkit::quadrature(g, Vec(u.cwiseProduct(u)));
        };
        F.el_gradient = [](const Grid&, const Vec& u) {
          return Vec(8.0 / 9.0 * u);
        };
        break;
      case 3:
        F.eval = [](const Grid& g, const Vec& u) {
          const Vec ux = dxo(g, u, 1);
          Vec d(g.N);
          for (int j = 0; j < g.N; ++j)
            d[j] = u[j] * u[j] * u[j] / 3.0 - ux[j] * ux[j];
          return 8.0 / 9.0 * fieldkit::quadrature(g, d);
        };
        F.el_gradient = [](const Grid& g, const Vec& u) {
          return Vec(8.0 / 9.0 * (u.cwiseProduct(u) + 2.0 * dxo(g, u, 2)));
        };
        break;
      default:
        F.eval = [](const Grid& g, const Vec& u) {
          const Vec ux = dxo(g, u, 1);
          const Vec uxx = dxo(g, u, 2);
          Vec d(g.N);
          for (int j = 0; j < g.N; ++j)
            d[j] = 5.0 / 36.0 * std::pow(u[j], 4) -
                   5.0 / 3.0 * u[j] * ux[j] * ux[j] + uxx[j] * uxx[j];
          return 64.0 / 45.0 * fieldkit::quadrature(g, d);
        };
        F.el_gradient = [](const Grid& g, const Vec& u) {
          const Vec ux = dxo(g, u, 1);
          const Vec uxx = dxo(g, u, 2);
          const Vec u4 = dxo(g, u, 4);
          Vec out(g.N);
          for (int j = 0; j < g.N; ++j)
            out[j] = 64.0 / 45.0 *
                     (5.0 / 9.0 * u[j] * u[j] * u[j] +
                      5.0 / 3.0 * ux[j] * ux[j] +
                      10.0 / 3.0 * u[j] * uxx[j] + 2.0 * u4[j]);
          return out;
        };
        break;
    }
    return F;
  }
  switch (m) {
    case 1:
      F.eval = [](const Grid& g, const Vec& u) {
        return -4.0 * fieldkit::quadrature(g, Vec(u.cwiseProduct(u)));
      };
      F.el_gradient = [](const Grid&, const Vec& u) { return Vec(-8.0 * u); };
      break;
    case 2:
      F.eval = [](const Grid& g, const Vec& u) {
        const Vec ux = dxo(g, u, 1);
        Vec d(g.N);
        for (int j = 0; j < g.N; ++j)
          d[j] = std::pow(u[j], 4) + ux[j] * ux[j];
        return 16.0 * fieldkit::quadrature(g, d);
      };
      F.el_gradient = [](const Grid& g, const Vec& u) {
        const Vec uxx = dxo(g, u, 2);
        Vec out(g.N);
        for (int j = 0; j < g.N; ++j)
          out[j] = 16.0 * (4.0 * u[j] * u[j] * u[j] - 2.0 * uxx[j]);
        return out;
      };
      break;
    case 3:
      F.eval = [](const Grid& g, const Vec& u) {
        const Vec ux = dxo(g, u, 1);
        const Vec uxx = dxo(g, u, 2);
        Vec d(g.N);
        for (int j = 0; j < g.N; ++j)
          d[j] = 2.0 * std::pow(u[j], 6) +
                 10.0 * u[j] * u[j] * ux[j] * ux[j] + uxx[j] * uxx[j];
        return -32.0 * fieldkit::quadrature(g, d);
      };
      F.el_gradient = [](const Grid& g, const Vec& u) {
        const Vec ux = dxo(g, u, 1);
        const Vec uxx = dxo(g, u, 2);
        const Vec u4 = dxo(g, u, 4);
        Vec out(g.N);
        for (int j = 0; j < g.N; ++j)
          out[j] = -32.0 * (12.0 * std::pow(u[j], 5) -
                            20.0 * u[j] * ux[j] * ux[j] -
                            20.0 * u[j] * u[j] * uxx[j] + 2.0 * u4[j]);
        return out;
      };
      break;
    default:
      F.eval = [](const Grid& g, const Vec& u) {
        const Vec ux = dxo(g, u, 1);
        const Vec uxx = dxo(g, u, 2);
        const Vec uxxx = dxo(g, u, 3);
        Vec d(g.N);
        for (int j = 0; j < g.N; ++j)
          d[j] = 5.0 * std::pow(u[j], 8) +
                 70.0 * std::pow(u[j], 4) * ux[j] * ux[j] -
                 7.0 * std::pow(ux[j], 4) +
                 14.0 * u[j] * u[j] * uxx[j] * uxx[j] + uxxx[j] * uxxx[j];
        return 256.0 / 5.0 * fieldkit::quadrature(g, d);
      };
      F.el_gradient = [](const Grid& g, const Vec& u) {
        const Vec ux = dxo(g, u, 1);
        const Vec uxx = dxo(g, u, 2);
        const Vec uxxx = dxo(g, u, 3);
        const Vec u4 = dxo(g, u, 4);
        const Vec u6 = dxo(g, u, 6);
        Vec out(g.N);
        for (int j = 0; j < g.N; ++j)
          out[j] = 256.0 / 5.0 *
                   (40.0 * std::pow(u[j], 7) -
                    280.0 * std::pow(u[j], 3) * ux[j] * ux[j] -
                    140.0 * std::pow(u[j], 4) * uxx[j] +
                    140.0 * ux[j] * ux[j] * uxx[j] +
                    84.0 * u[j] * uxx[j] * uxx[j] +
                    112.0 * u[j] * ux[j] * uxxx[j] +
                    28.0 * u[j] * u[j] * u4[j] - 2.0 * u6[j]);
        return out;
      };
      break;
  }
  return F;
}

fieldkit::ComplexFunctional invariant_functional_c(int m) {
  if (m < 1 || m > 4)
    throw ValidationError("invariant_functional_c: m must lie in 1..4");
  fieldkit::ComplexFunctional F;
  F.name = "nse.I" + std::to_string(m);
  switch (m) {
    case 1:
      F.eval = [](const Grid& g, const CVec& p) {
        Vec d(g.N);
        for (int j = 0; j < g.N; ++j) d[j] = std::norm(p[j]);
        return 2.0 * fieldkit::quadrature(g, d);
      };
      F.el_gradient = [](const Grid&, const CVec& p) {
        return CVec(2.0 * p.conjugate());
      };
      break;
    case 2:
      F.eval = [](const Grid& g, const CVec& p) {
        const CVec px = dxo(g, p, 1);
        CVec d(g.N);
        for (int j = 0; j < g.N; ++j)
          d[j] = cplx(0.0, 1.0) *
                 (std::conj(px[j]) * p[j] - px[j] * std::conj(p[j]));
        return fieldkit::quadrature(g, d);
      };
      F.el_gradient = [](const Grid& g, const CVec& p) {
        return CVec(2.0 * cplx(0.0, 1.0) * dxo(g, p, 1).conjugate());
      };
      break;
    case 3:
      F.eval = [](const Grid& g, const CVec& p) {
        const CVec px = dxo(g, p, 1);
        Vec d(g.N);
        for (int j = 0; j < g.N; ++j)
          d[j] = std::norm(p[j]) * std::norm(p[j]) - std::norm(px[j]);
        return 2.0 * fieldkit::quadrature(g, d);
      };
      F.el_gradient = [](const Grid& g, const CVec& p) {
        const CVec pxx = dxo(g, p, 2);
        CVec out(g.N);
        for (int j = 0; j < g.N; ++j)
          out[j] = 4.0 * p[j] * std::conj(p[j]) * std::conj(p[j]) +
                   2.0 * std::conj(pxx[j]);
        return out;
      };
      break;
    default:
      F.eval = [](const Grid& g, const CVec& p) {
        const CVec px = dxo(g, p, 1);
        const CVec pxx = dxo(g, p, 2);
        CVec d(g.N);
        for (int j = 0; j < g.N; ++j) {
          const cplx ps = std::conj(p[j]);
          d[j] = cplx(0.0, 1.0) *
                     (std::conj(px[j]) * pxx[j] - px[j] * std::conj(pxx[j])) +
                 cplx(0.0, 3.0) * (ps * p[j] * p[j] * std::conj(px[j]) -
                                   p[j] * ps * ps * px[j]);
        }
        return fieldkit::quadrature(g, d);
      };
      F.el_gradient = [](const Grid& g, const CVec& p) {
        const CVec px = dxo(g, p, 1);
        const CVec pxxx = dxo(g, p, 3);
        CVec out(g.N);
        for (int j = 0; j < g.N; ++j)
          out[j] = 2.0 * cplx(0.0, 1.0) *
                   (std::conj(pxxx[j]) +
                    6.0 * p[j] * std::conj(p[j]) * std::conj(px[j]));
        return out;
      };
      break;
  }
  return F;
}

fieldkit::Functional hamiltonian_functional(Kind k) {
  require_real(k, "hamiltonian_functional");
  fieldkit::Functional F;
  F.name = std::string(kind_name(k)) + ".h";
  if (k == Kind::kdv) {
    F.eval = [](const Grid& g, const Vec& u) {
      const Vec ux = dxo(g, u, 1);
      Vec d(g.N);
      for (int j = 0; j < g.N; ++j)
        d[j] = ux[j] * ux[j] - u[j] * u[j] * u[j] / 3.0;
      return fieldkit::quadrature(g, d);
    };
    F.el_gradient = [](const Grid& g, const Vec& u) {
      return Vec(-2.0 * dxo(g, u, 2) - u.cwiseProduct(u));
    };
    return F;
  }
  F.eval = [](const Grid& g, const Vec& u) {
    const Vec ux = dxo(g, u, 1);
    Vec d(g.N);
    for (int j = 0; j < g.N; ++j)
      d[j] = ux[j] * ux[j] + std::pow(u[j], 4);
    return fieldkit::quadrature(g, d);
  };
  F.el_gradient = [](const Grid& g, const Vec& u) {
    const Vec uxx = dxo(g, u, 2);
    Vec out(g.N);
    for (int j = 0; j < g.N; ++j)
      out[j] = -2.0 * uxx[j] + 4.0 * u[j] * u[j] * u[j];
    return out;
  };
  return F;
}

fieldkit::ComplexFunctional hamiltonian_functional_c() {
  fieldkit::ComplexFunctional F;
  F.name = "nse.h";
  F.eval = [](const Grid& g, const CVec& p) {
    const CVec px = dxo(g, p, 1);
    Vec d(g.N);
    for (int j = 0; j < g.N; ++j)
      d[j] = std::norm(p[j]) * std::norm(p[j]) - std::norm(px[j]);
    return fieldkit::quadrature(g, d);
  };
  F.el_gradient = [](const Grid& g, const CVec& p) {
    const CVec pxx = dxo(g, p, 2);
    CVec out(g.N);
    for (int j = 0; j < g.N; ++j)
      out[j] = 2.0 * p[j] * std::conj(p[j]) * std::conj(p[j]) +
               std::conj(pxx[j]);
    return out;
  };
  return F;
}

Vec invariants(Kind k, const Grid& g, const Vec& u) {
  require_real(k, "invariants");
  Vec out(4);
  for (int m = 1; m <= 4; ++m)
    out[m - 1] = invariant_functional(k, m).eval(g, u);
  return out;
}

Vec invariants(Kind k, const Grid& g, const CVec& psi) {
  require_complex(k, "invariants");
  Vec out(4);
  for (int m = 1; m <= 4; ++m)
    out[m - 1] = invariant_functional_c(m).eval(g, psi);
  return out;
}

double hamiltonian(Kind k, const Grid& g, const Vec& u) {
  return hamiltonian_functional(k).eval(g, u);
}

double hamiltonian(Kind k, const Grid& g, const CVec& psi) {
  require_complex(k, "hamiltonian");
  return hamiltonian_functional_c().eval(g, psi);
}

double gradient_route_deviation(Kind k, const Grid& g, const Vec& u) {
  require_real(k, "gradient_route_deviation");
  double worst = 0.0;
  auto probe = [&](const fieldkit::Functional& F) {
    fieldkit::Functional fd_only{F.name, F.eval, nullptr};
    const Vec gfd = fieldkit::functional_gradient(g, fd_only, u);
    const Vec el = F.el_gradient(g, u);
    worst = std::max(worst, (gfd - el).cwiseAbs().maxCoeff() /
                                std::max(1.0, el.cwiseAbs().maxCoeff()));
  };
  for (int m = 1; m <= 4; ++m) probe(invariant_functional(k, m));
  probe(hamiltonian_functional(k));
  return worst;
}

double gradient_route_deviation(Kind k, const Grid& g, const CVec& psi) {
  require_complex(k, "gradient_route_deviation");
  double worst = 0.0;
  auto probe = [&](const fieldkit::ComplexFunctional& F) {
    fieldkit::ComplexFunctional fd_only{F.name, F.eval, nullptr};
    const CVec gfd = fieldkit::functional_gradient(g, fd_only, psi);
    const CVec el = F.el_gradient(g, psi);
    worst = std::max(worst, (gfd - el).cwiseAbs().maxCoeff() /
                                std::max(1.0, el.cwiseAbs().maxCoeff()));
  };
  for (int m = 1; m <= 4; ++m) probe(invariant_functional_c(m));
  probe(hamiltonian_functional_c());
  return worst;
}

// ===== structure calibration =====

namespace {

Vec reference_real(const Grid& g, double shift) {
  const Vec xs = g.x();
  Vec u(g.N);
  for (int j = 0; j < g.N; ++j)
    u[j] = 0.5 * std::exp(-(xs[j] - shift) * (xs[j] - shift) / 4.5);
  return u;
}

CVec reference_complex(const Grid& g, double shift) {
  const Vec xs = g.x();
  CVec p(g.N);
  for (int j = 0; j < g.N; ++j)
    p[j] = 0.8 * std::exp(-(xs[j] - shift) * (xs[j] - shift) / 4.0);
  return p;
}

const std::array<double, 6> kSignCandidates = {0.5, -0.5, 1.0, -1.0, 2.0,
                                               -2.0};

fieldkit::BracketCalibration calibrate_structure(Structure st) {
  const Grid g = Grid::make(40.0, 256);
  std::array<double, 6> devs{};
  if (st == Structure::gardner) {
    const Vec u = reference_real(g, 0.0);
    const Vec target = rhs(Kind::kdv, g, u);
    const double scale = std::max(1.0, target.cwiseAbs().maxCoeff());
    const Vec gh =
        fieldkit::functional_gradient(g, hamiltonian_functional(Kind::kdv), u);
    const Vec ghx = dxo(g, gh, 1);
    for (std::size_t i = 0; i < kSignCandidates.size(); ++i) {
      const Vec flow = -kSignCandidates[i] * ghx;
      devs[i] = (flow - target).cwiseAbs().maxCoeff() / scale;
    }
  } else {
    const CVec p = reference_complex(g, 0.0);
    const CVec target = rhs(Kind::nse, g, p);
    const double scale = std::max(1.0, target.cwiseAbs().maxCoeff());
    const CVec gh =
        fieldkit::functional_gradient(g, hamiltonian_functional_c(), p);
    for (std::size_t i = 0; i < kSignCandidates.size(); ++i) {
      const CVec flow =
          -kSignCandidates[i] * cplx(0.0, 1.0) * gh.conjugate();
      devs[i] = (flow - target).cwiseAbs().maxCoeff() / scale;
    }
  }
  std::array<std::size_t, 6> order{0, 1, 2, 3, 4, 5};
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return devs[a] < devs[b]; });
  const double best = devs[order[0]];
  const double second = devs[order[1]];
  if (best >= 1e-6 || second <= 1e-4) {
    std::ostringstream msg;
    msg << "structure_calibration: no unique sign reproduces the model flow;"
        << " candidate residuals:";
    for (std::size_t i = 0; i < kSignCandidates.size(); ++i)
      msg << " s=" << kSignCandidates[i] << " -> " << devs[i];
    throw CalibrationError(msg.str());
  }
  return fieldkit::BracketCalibration{kSignCandidates[order[0]], true};
}

}  // namespace

const fieldkit::BracketCalibration& structure_calibration(Structure st) {
  static fieldkit::BracketCalibration cals[2];
  static std::once_flag flags[2];
  const int idx = st == Structure::gardner ? 0 : 1;
  std::call_once(flags[idx], [&] { cals[idx] = calibrate_structure(st); });
  return cals[idx];
}

double hamiltonian_flow_deviation(const ModelSpec& spec, const Vec& u) {
  require_real(spec.kind, "hamiltonian_flow_deviation");
  const auto& cal = structure_calibration(Structure::gardner);
  const Vec gh = fieldkit::functional_gradient(
      spec.grid, hamiltonian_functional(spec.kind), u);
  const Vec flow = fieldkit::bracket_flow(spec.grid, Structure::gardner, gh,
                                          cal);
  const Vec target = rhs(spec.kind, spec.grid, u);
  return (flow - target).cwiseAbs().maxCoeff() /
         std::max(1.0, target.cwiseAbs().maxCoeff());
}

double hamiltonian_flow_deviation(const ModelSpec& spec, const CVec& psi) {
  require_complex(spec.kind, "hamiltonian_flow_deviation");
  const auto& cal = structure_calibration(Structure::nse);
  const CVec gh =
      fieldkit::functional_gradient(spec.grid, hamiltonian_functional_c(), psi);
  const CVec flow =
      fieldkit::bracket_flow(spec.grid, Structure::nse, gh, cal);
  const CVec target = rhs(spec.kind, spec.grid, psi);
  return (flow - target).cwiseAbs().maxCoeff() /
         std::max(1.0, target.cwiseAbs().maxCoeff());
}

Mat involutivity_matrix(const ModelSpec& spec, const Vec& u) {
  require_real(spec.kind, "involutivity_matrix");
  const auto& cal = structure_calibration(Structure::gardner);
  std::vector<Vec> grads;
  for (int m = 1; m <= 4; ++m)
    grads.push_back(fieldkit::functional_gradient(
        spec.grid, invariant_functional(spec.kind, m), u));
  Mat M = Mat::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j)
        M(i, j) = fieldkit::field_poisson_bracket(
            spec.grid, Structure::gardner, grads[i], grads[j], cal);
  return M;
}

Mat involutivity_matrix(const ModelSpec& spec, const CVec& psi) {
  require_complex(spec.kind, "involutivity_matrix");
  const auto& cal = structure_calibration(Structure::nse);
  std::vector<CVec> grads;
  for (int m = 1; m <= 4; ++m)
    grads.push_back(fieldkit::functional_gradient(
        spec.grid, invariant_functional_c(m), psi));
  Mat M = Mat::Zero(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j)
        M(i, j) = fieldkit::field_poisson_bracket(
            spec.grid, Structure::nse, grads[i], grads[j], cal);
  return M;
}

double probe_bracket(const ModelSpec& spec, const Vec& u) {
  require_real(spec.kind, "probe_bracket");
  const auto& cal = structure_calibration(Structure::gardner);
  const Vec g3 = fieldkit::functional_gradient(
      spec.grid, invariant_functional(spec.kind, 3), u);
  fieldkit::Functional probe;
  probe.name = "probe.cos1";
  probe.eval = [](const Grid& g, const Vec& w) {
    const Vec xs = g.x();
    Vec d(g.N);
    for (int j = 0; j < g.N; ++j)
      d[j] = std::cos(2.0 * M_PI * xs[j] / g.L) * w[j];
    return fieldkit::quadrature(g, d);
  };
  probe.el_gradient = [](const Grid& g, const Vec&) {
    const Vec xs = g.x();
    Vec out(g.N);
    for (int j = 0; j < g.N; ++j)
      out[j] = std::cos(2.0 * M_PI * xs[j] / g.L);
    return out;
  };
  const Vec gp = fieldkit::functional_gradient(spec.grid, probe, u);
  return fieldkit::field_poisson_bracket(spec.grid, Structure::gardner, g3,
                                         gp, cal);
}

// ===== variations and display-scale calibration =====

Vec compact_variation(const Grid& g, Rng& rng) {
  const Vec xs = g.x();
  Vec f = Vec::Zero(g.N);
  for (int m = 1; m <= 6; ++m) {
    const double a = rng.normal();
    const double b = rng.normal();
    for (int j = 0; j < g.N; ++j) {
      const double arg = 2.0 * M_PI * m * xs[j] / g.L;
      f[j] += a * std::cos(arg) + b * std::sin(arg);
    }
  }
  for (int j = 0; j < g.N; ++j)
    f[j] *= std::exp(-xs[j] * xs[j] / 9.0) / 3.0;
  return fieldkit::spectral_derivative(g, f, 1);
}

CVec compact_variation_c(const Grid& g, Rng& rng) {
  const Vec xs = g.x();
  CVec f = CVec::Zero(g.N);
  for (int m = 1; m <= 6; ++m) {
    const double a = rng.normal();
    const double b = rng.normal();
    const double c = rng.normal();
    const double d = rng.normal();
    for (int j = 0; j < g.N; ++j) {
      const double arg = 2.0 * M_PI * m * xs[j] / g.L;
      f[j] += cplx(a * std::cos(arg) + b * std::sin(arg),
                   c * std::cos(arg) + d * std::sin(arg));
    }
  }
  for (int j = 0; j < g.N; ++j)
    f[j] *= std::exp(-xs[j] * xs[j] / 9.0) / 3.0;
  return fieldkit::spectral_derivative(g, f, 1);
}

namespace {

struct SigmaCal {
  double sigma = 0.0;
  double winner_dev = 0.0;
  double runner_up_dev = 0.0;
};

TwoFormKind display_kind(Kind k) {
  switch (k) {
    case Kind::kdv:
      return TwoFormKind::leo_kdv;
    case Kind::mkdv:
      return TwoFormKind::leo_mkdv;
    default:
      return TwoFormKind::leo_nse;
  }
}

const std::array<double, 6> kSigmaCandidates = {1.0, -1.0, 0.5,
                                                -0.5, 2.0, -2.0};

SigmaCal calibrate_sigma(Kind k) {
  const Grid g = Grid::make(40.0, 256);
  Rng rng(910100 + static_cast<std::uint64_t>(k));
  std::array<double, 6> devs{};
  auto tally = [&](double D, double C) {
    for (std::size_t i = 0; i < kSigmaCandidates.size(); ++i)
      devs[i] = std::max(devs[i],
                         std::abs(kSigmaCandidates[i] * D - C) /
                             std::max({std::abs(C), std::abs(D), 1e-12}));
  };
  if (is_complex_kind(k)) {
    const CVec base = reference_complex(g, 0.0);
    auto omega = [&](const CVec& w, const CVec& a, const CVec& b) {
      return fieldkit::two_form_eval(g, TwoFormKind::canonical_nse, w, a, b);
    };
    auto gen = [&](const CVec& w, double t) { return generator(k, g, w, t); };
    for (double t0 : {0.0, 0.3})
      for (int trial = 0; trial < 5; ++trial) {
        const CVec d1 = compact_variation_c(g, rng);
        const CVec d2 = compact_variation_c(g, rng);
        const double D =
            fieldkit::two_form_eval(g, display_kind(k), base, d1, d2);
        const double C =
            fieldkit::lie_derivative_commutator(g, omega, gen, base, d1, d2,
                                                t0);
        tally(D, C);
      }
  } else {
    const Vec base = reference_real(g, 0.0);
    auto omega = [&](const Vec& w, const Vec& a, const Vec& b) {
      return fieldkit::two_form_eval(g, TwoFormKind::canonical_gardner, w, a,
                                     b);
    };
    auto gen = [&](const Vec& w, double t) { return generator(k, g, w, t); };
    for (double t0 : {0.0, 0.3})
      for (int trial = 0; trial < 5; ++trial) {
        const Vec d1 = compact_variation(g, rng);
        const Vec d2 = compact_variation(g, rng);
        const double D =
            fieldkit::two_form_eval(g, display_kind(k), base, d1, d2);
        const double C =
            fieldkit::lie_derivative_commutator(g, omega, gen, base, d1, d2,
                                                t0);
        tally(D, C);
      }
  }
  std::array<std::size_t, 6> order{0, 1, 2, 3, 4, 5};
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return devs[a] < devs[b]; });
  const double best = devs[order[0]];
  const double second = devs[order[1]];
  if (best >= 1e-6 || second <= 1e-4) {
    std::ostringstream msg;
    msg << "leo_sigma(" << kind_name(k)
        << "): no unique display scale matches the commutator route;"
        << " candidate deviations:";
    for (std::size_t i = 0; i < kSigmaCandidates.size(); ++i)
      msg << " sigma=" << kSigmaCandidates[i] << " -> " << devs[i];
    throw CalibrationError(msg.str());
  }
  return SigmaCal{kSigmaCandidates[order[0]], best, second};
}

const SigmaCal& sigma_calibration(Kind k) {
  static SigmaCal cals[3];
  static std::once_flag flags[3];
  const int idx = static_cast<int>(k);
  std::call_once(flags[idx], [&] { cals[idx] = calibrate_sigma(k); });
  return cals[idx];
}

}  // namespace

double leo_sigma(Kind k) { return sigma_calibration(k).sigma; }

LeOmegaReport le_omega_check(const ModelSpec& spec, const Vec& base,
                             int pairs, Rng& rng) {
  require_real(spec.kind, "le_omega_check");
  require_size(spec.grid, base.size(), "le_omega_check");
  if (pairs < 1) throw ValidationError("le_omega_check: pairs must be >= 1");
  const SigmaCal& sc = sigma_calibration(spec.kind);
  const Grid& g = spec.grid;
  LeOmegaReport rep;
  rep.sigma = sc.sigma;
  rep.calibration_dev = sc.winner_dev;
  rep.runner_up_dev = sc.runner_up_dev;
  rep.pairs = pairs;
  auto omega = [&](const Vec& w, const Vec& a, const Vec& b) {
    return fieldkit::two_form_eval(g, TwoFormKind::canonical_gardner, w, a, b);
  };
  auto gen = [&](const Vec& w, double t) {
    return generator(spec.kind, g, w, t);
  };
  std::vector<Vec> sampled;
  for (int i = 0; i < pairs; ++i) {
    const Vec d1 = compact_variation(g, rng);
    const Vec d2 = compact_variation(g, rng);
    const double t0 = i % 2 == 0 ? 0.0 : 0.3;
    const double D =
        fieldkit::two_form_eval(g, display_kind(spec.kind), base, d1, d2);
    const double C =
        fieldkit::lie_derivative_commutator(g, omega, gen, base, d1, d2, t0);
    rep.max_rel_dev =
        std::max(rep.max_rel_dev, std::abs(sc.sigma * D - C) /
                                      std::max({std::abs(C), std::abs(D),
                                                1e-12}));
    if (sampled.size() < 6) sampled.push_back(d1);
    if (sampled.size() < 6) sampled.push_back(d2);
  }
  const int K = static_cast<int>(sampled.size());
  Mat A = Mat::Zero(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      A(i, j) = sc.sigma * fieldkit::two_form_eval(g, display_kind(spec.kind),
                                                   base, sampled[i],
                                                   sampled[j]);
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& sv = svd.singularValues();
  if (sv.size() > 0 && sv[0] > 0.0)
    rep.rank_ratio = sv[sv.size() - 1] / sv[0];
  return rep;
}

LeOmegaReport le_omega_check(const ModelSpec& spec, const CVec& base,
                             int pairs, Rng& rng) {
  require_complex(spec.kind, "le_omega_check");
  require_size(spec.grid, base.size(), "le_omega_check");
  if (pairs < 1) throw ValidationError("le_omega_check: pairs must be >= 1");
  const SigmaCal& sc = sigma_calibration(spec.kind);
  const Grid& g = spec.grid;
  LeOmegaReport rep;
  rep.sigma = sc.sigma;
  rep.calibration_dev = sc.winner_dev;
  rep.runner_up_dev = sc.runner_up_dev;
  rep.pairs = pairs;
  auto omega = [&](const CVec& w, const CVec& a, const CVec& b) {
    return fieldkit::two_form_eval(g, TwoFormKind::canonical_nse, w, a, b);
  };
  auto gen = [&](const CVec& w, double t) {
    return generator(spec.kind, g, w, t);
  };
  std::vector<CVec> sampled;
  for (int i = 0; i < pairs; ++i) {
    const CVec d1 = compact_variation_c(g, rng);
    const CVec d2 = compact_variation_c(g, rng);
    const double t0 = i % 2 == 0 ? 0.0 : 0.3;
    const double D =
        fieldkit::two_form_eval(g, display_kind(spec.kind), base, d1, d2);
    const double C =
        fieldkit::lie_derivative_commutator(g, omega, gen, base, d1, d2, t0);
    rep.max_rel_dev =
        std::max(rep.max_rel_dev, std::abs(sc.sigma * D - C) /
                                      std::max({std::abs(C), std::abs(D),
                                                1e-12}));
    if (sampled.size() < 6) sampled.push_back(d1);
    if (sampled.size() < 6) sampled.push_back(d2);
  }
  const int K = static_cast<int>(sampled.size());
  Mat A = Mat::Zero(K, K);
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      A(i, j) = sc.sigma * fieldkit::two_form_eval(g, display_kind(spec.kind),
                                                   base, sampled[i],
                                                   sampled[j]);
  Eigen::JacobiSVD<Mat> svd(A);
  const auto& sv = svd.singularValues();
  if (sv.size() > 0 && sv[0] > 0.0)
    rep.rank_ratio = sv[sv.size() - 1] / sv[0];
  return rep;
}

}  // namespace binoether::pdemodels
