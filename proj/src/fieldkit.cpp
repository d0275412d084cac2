#include "binoether/fieldkit.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>

namespace binoether::fieldkit {

namespace {

struct PlanPair {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

std::mutex plan_mutex;

// Plans are created once per size on fftw-allocated scratch and reused via
// the new-array execute interface; execution is thread-safe, creation is not.
const PlanPair& plans_for(int N) {
  static std::map<int, PlanPair> cache;
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto it = cache.find(N);
  if (it != cache.end()) return it->second;
  fftw_complex* a = fftw_alloc_complex(N);
  fftw_complex* b = fftw_alloc_complex(N);
  PlanPair pp;
  pp.fwd = fftw_plan_dft_1d(N, a, b, FFTW_FORWARD, FFTW_ESTIMATE);
  pp.bwd = fftw_plan_dft_1d(N, a, b, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_free(a);
  fftw_free(b);
  return cache.emplace(N, pp).first->second;
}

CVec run_plan(const CVec& in, bool forward) {
  const int N = static_cast<int>(in.size());
  const PlanPair& pp = plans_for(N);
  fftw_complex* a = fftw_alloc_complex(N);
  fftw_complex* b = fftw_alloc_complex(N);
  std::memcpy(a, static_cast<const void*>(in.data()),
              sizeof(fftw_complex) * N);
  fftw_execute_dft(forward ? pp.fwd : pp.bwd, a, b);
  CVec out(N);
  std::memcpy(static_cast<void*>(out.data()), b, sizeof(fftw_complex) * N);
  fftw_free(a);
  fftw_free(b);
  return out;
}

void check_samples(const Grid& g, Eigen::Index size, const char* who) {
  if (size != g.N) {
    std::ostringstream msg;
    msg << who << ": sample count " << size << " does not match grid N = "
        << g.N;
    throw ValidationError(msg.str());
  }
}

// Spectral inversion of d_x with the zero mode dropped.
CVec raw_antiderivative(const Grid& g, const CVec& f) {
  CVec fk = fft(f);
  const Vec k = g.wavenumbers();
  fk[0] = 0.0;
  for (int j = 1; j < g.N; ++j) fk[j] /= cplx(0.0, k[j]);
  return ifft(fk);
}

double gateaux_step(double base_scale, double dir_scale) {
  return fd_step(base_scale) / std::max(1.0, dir_scale);
}

}  // namespace

Grid Grid::make(double L, int N) {
  if (!(L > 0.0) || !std::isfinite(L))
    throw ValidationError("Grid: L must be positive and finite");
  if (N < 16 || (N & (N - 1)) != 0)
    throw ValidationError("Grid: N must be a power of two >= 16");
  return Grid{L, N};
}

Vec Grid::x() const {
  Vec out(N);
  for (int j = 0; j < N; ++j) out[j] = -L / 2.0 + j * L / N;
  return out;
}

Vec Grid::wavenumbers() const {
  Vec out(N);
  for (int j = 0; j < N; ++j) {
    const int m = j < N / 2 ? j : j - N;
    out[j] = 2.0 * M_PI * m / L;
  }
  return out;
}

bool same_grid(const Grid& a, const Grid& b) {
  return a.L == b.L && a.N == b.N;
}

RealField make_field(const Grid& g, Vec samples) {
  check_samples(g, samples.size(), "make_field");
  if (!samples.allFinite())
    throw ValidationError("make_field: non-finite samples");
  return RealField{g, std::move(samples)};
}

ComplexField make_field(const Grid& g, CVec samples) {
  check_samples(g, samples.size(), "make_field");
  if (!samples.allFinite())
    throw ValidationError("make_field: non-finite samples");
  return ComplexField{g, std::move(samples)};
}

CVec fft(const CVec& in) { return run_plan(in, true); }

CVec ifft(const CVec& in) {
  CVec out = run_plan(in, false);
  out /= static_cast<double>(in.size());
  return out;
}

CVec spectral_derivative(const Grid& g, const CVec& f, int order) {
  if (order < 1)
    throw ValidationError("spectral_derivative: order must be >= 1");
  check_samples(g, f.size(), "spectral_derivative");
  CVec fk = fft(f);
  const Vec k = g.wavenumbers();
  for (int j = 0; j < g.N; ++j) {
    cplx mult = 1.0;
    const cplx ik(0.0, k[j]);
    for (int o = 0; o < order; ++o) mult *= ik;
    fk[j] *= mult;
  }
  if (order % 2 == 1) fk[g.N / 2] = 0.0;
  return ifft(fk);
}

Vec spectral_derivative(const Grid& g, const Vec& f, int order) {
  CVec c = f.cast<cplx>();
  return spectral_derivative(g, c, order).real();
}

Vec antiderivative(const Grid& g, const Vec& f, Anchor anchor) {
  check_samples(g, f.size(), "antiderivative");
  const double m = f.mean();
  if (anchor == Anchor::zero_mean) {
    if (std::abs(m) >= 1e-10) {
      std::ostringstream msg;
      msg << "antiderivative: zero_mean anchoring needs |mean| < 1e-10, got "
          << m;
      throw ValidationError(msg.str());
    }
    return raw_antiderivative(g, f.cast<cplx>()).real();
  }
  Vec f0 = f.array() - m;
  Vec gpart = raw_antiderivative(g, f0.cast<cplx>()).real();
  Vec ramp = g.x().array() + g.L / 2.0;
  return (m * ramp + gpart).array() - gpart[0];
}

double quadrature(const Grid& g, const Vec& f) {
  check_samples(g, f.size(), "quadrature");
  return g.dx() * f.sum();
}

double quadrature(const Grid& g, const CVec& f) {
  check_samples(g, f.size(), "quadrature");
  const cplx s = g.dx() * f.sum();
  if (std::abs(s.imag()) > 1e-10 * std::max(1.0, std::abs(s.real()))) {
    std::ostringstream msg;
    msg << "quadrature: imaginary residue " << s.imag()
        << " violates conjugation symmetry (real part " << s.real() << ")";
    throw ValidationError(msg.str());
  }
  return s.real();
}

double gateaux(const std::function<double(const Vec&)>& F, const Vec& u,
               const Vec& delta) {
  const double h =
      gateaux_step(u.cwiseAbs().maxCoeff(), delta.cwiseAbs().maxCoeff());
  return (F(u + h * delta) - F(u - h * delta)) / (2.0 * h);
}

double gateaux(const std::function<double(const CVec&)>& F, const CVec& u,
               const CVec& delta) {
  const double h =
      gateaux_step(u.cwiseAbs().maxCoeff(), delta.cwiseAbs().maxCoeff());
  return (F(u + h * delta) - F(u - h * delta)) / (2.0 * h);
}

Vec gateaux_map(const std::function<Vec(const Vec&)>& F, const Vec& u,
                const Vec& delta) {
  const double h =
      gateaux_step(u.cwiseAbs().maxCoeff(), delta.cwiseAbs().maxCoeff());
  return (F(u + h * delta) - F(u - h * delta)) / (2.0 * h);
}

CVec gateaux_map(const std::function<CVec(const CVec&)>& F, const CVec& u,
                 const CVec& delta) {
  const double h =
      gateaux_step(u.cwiseAbs().maxCoeff(), delta.cwiseAbs().maxCoeff());
  return (F(u + h * delta) - F(u - h * delta)) / (2.0 * h);
}

Vec functional_gradient(const Grid& g, const Functional& F, const Vec& u) {
  if (!F.eval) throw ValidationError("functional_gradient: missing eval");
  check_samples(g, u.size(), "functional_gradient");
  const double h = fd_step(u.cwiseAbs().maxCoeff());
  Vec grad(g.N);
  Vec up = u, um = u;
  for (int j = 0; j < g.N; ++j) {
    up[j] += h;
    um[j] -= h;
    grad[j] = (F.eval(g, up) - F.eval(g, um)) / (2.0 * h);
    up[j] = u[j];
    um[j] = u[j];
  }
  grad /= g.dx();
  if (F.el_gradient) {
    const Vec el = F.el_gradient(g, u);
    const double dev = (grad - el).cwiseAbs().maxCoeff() /
                       std::max(1.0, el.cwiseAbs().maxCoeff());
    if (dev > 1e-4) {
      std::ostringstream msg;
      msg << "functional_gradient: finite-difference and Euler-Lagrange "
             "routes disagree for '"
          << F.name << "' (relative deviation " << dev << ")";
      throw ValidationError(msg.str());
    }
  }
  return grad;
}

CVec functional_gradient(const Grid& g, const ComplexFunctional& F,
                         const CVec& psi) {
  if (!F.eval) throw ValidationError("functional_gradient: missing eval");
  check_samples(g, psi.size(), "functional_gradient");
  const double h = fd_step(psi.cwiseAbs().maxCoeff());
  CVec grad(g.N);
  CVec pp = psi, pm = psi;
  for (int j = 0; j < g.N; ++j) {
    pp[j] += h;
    pm[j] -= h;
    const double gu = (F.eval(g, pp) - F.eval(g, pm)) / (2.0 * h);
    pp[j] = psi[j];
    pm[j] = psi[j];
    pp[j] += cplx(0.0, h);
    pm[j] -= cplx(0.0, h);
    const double gv = (F.eval(g, pp) - F.eval(g, pm)) / (2.0 * h);
    pp[j] = psi[j];
    pm[j] = psi[j];
    grad[j] = 0.5 * cplx(gu, -gv);
  }
  grad /= g.dx();
  if (F.el_gradient) {
    const CVec el = F.el_gradient(g, psi);
    const double dev = (grad - el).cwiseAbs().maxCoeff() /
                       std::max(1.0, el.cwiseAbs().maxCoeff());
    if (dev > 1e-4) {
      std::ostringstream msg;
      msg << "functional_gradient: finite-difference and Euler-Lagrange "
             "routes disagree for '"
          << F.name << "' (relative deviation " << dev << ")";
      throw ValidationError(msg.str());
    }
  }
  return grad;
}

namespace {

void require_calibrated(const BracketCalibration& cal) {
  if (!cal.calibrated)
    throw CalibrationError(
        "field_poisson_bracket: structure sign not calibrated yet");
}

double nse_pairing(const Grid& g, const CVec& a, const CVec& b) {
  cplx acc = 0.0;
  for (int j = 0; j < g.N; ++j)
    acc += a[j] * std::conj(b[j]) - std::conj(a[j]) * b[j];
  return (cplx(0.0, 1.0) * acc * g.dx()).real();
}

}  // namespace

double field_poisson_bracket(const Grid& g, Structure st, const Vec& grad_f,
                             const Vec& grad_g, const BracketCalibration& cal) {
  require_calibrated(cal);
  if (st != Structure::gardner)
    throw ValidationError("field_poisson_bracket: real gradients need the "
                          "gardner structure");
  check_samples(g, grad_f.size(), "field_poisson_bracket");
  check_samples(g, grad_g.size(), "field_poisson_bracket");
  const Vec dg = spectral_derivative(g, grad_g, 1);
  return cal.s * quadrature(g, Vec(grad_f.cwiseProduct(dg)));
}

double field_poisson_bracket(const Grid& g, Structure st, const CVec& grad_f,
                             const CVec& grad_g,
                             const BracketCalibration& cal) {
  require_calibrated(cal);
  if (st != Structure::nse)
    throw ValidationError("field_poisson_bracket: complex gradients need the "
                          "nse structure");
  check_samples(g, grad_f.size(), "field_poisson_bracket");
  check_samples(g, grad_g.size(), "field_poisson_bracket");
  return cal.s * nse_pairing(g, grad_f, grad_g);
}

Vec bracket_flow(const Grid& g, Structure st, const Vec& grad_h,
                 const BracketCalibration& cal) {
  require_calibrated(cal);
  if (st != Structure::gardner)
    throw ValidationError("bracket_flow: real gradient needs the gardner "
                          "structure");
  return -cal.s * spectral_derivative(g, grad_h, 1);
}

CVec bracket_flow(const Grid& g, Structure st, const CVec& grad_h,
                  const BracketCalibration& cal) {
  require_calibrated(cal);
  if (st != Structure::nse)
    throw ValidationError("bracket_flow: complex gradient needs the nse "
                          "structure");
  check_samples(g, grad_h.size(), "bracket_flow");
  return -cal.s * cplx(0.0, 1.0) * grad_h.conjugate();
}

double two_form_eval(const Grid& g, TwoFormKind kind, const Vec& base,
                     const Vec& d1, const Vec& d2) {
  check_samples(g, base.size(), "two_form_eval");
  check_samples(g, d1.size(), "two_form_eval");
  check_samples(g, d2.size(), "two_form_eval");
  switch (kind) {
    case TwoFormKind::canonical_gardner: {
      const Vec a1 = antiderivative(g, d1, Anchor::left_anchored);
      const Vec a2 = antiderivative(g, d2, Anchor::left_anchored);
      return quadrature(g, Vec(d1.cwiseProduct(a2) - d2.cwiseProduct(a1)));
    }
    case TwoFormKind::leo_kdv: {
      const Vec dx1 = spectral_derivative(g, d1, 1);
      const Vec dx2 = spectral_derivative(g, d2, 1);
      const Vec a1 = antiderivative(g, d1, Anchor::left_anchored);
      const Vec a2 = antiderivative(g, d2, Anchor::left_anchored);
      const double t1 =
          quadrature(g, Vec(d1.cwiseProduct(dx2) - d2.cwiseProduct(dx1)));
      const Vec mix = base.cwiseProduct(d1.cwiseProduct(a2) -
                                        d2.cwiseProduct(a1));
      return t1 + (2.0 / 3.0) * quadrature(g, mix);
    }
    case TwoFormKind::leo_mkdv: {
      const Vec dx1 = spectral_derivative(g, d1, 1);
      const Vec dx2 = spectral_derivative(g, d2, 1);
      const Vec dw1 =
          antiderivative(g, Vec(2.0 * base.cwiseProduct(d1)),
                         Anchor::left_anchored);
      const Vec dw2 =
          antiderivative(g, Vec(2.0 * base.cwiseProduct(d2)),
                         Anchor::left_anchored);
      const double t1 =
          quadrature(g, Vec(d1.cwiseProduct(dx2) - d2.cwiseProduct(dx1)));
      const Vec mix = base.cwiseProduct(d1.cwiseProduct(dw2) -
                                        d2.cwiseProduct(dw1));
      return t1 - 2.0 * quadrature(g, mix);
    }
    default:
      throw ValidationError("two_form_eval: this kind acts on complex fields");
  }
}

double two_form_eval(const Grid& g, TwoFormKind kind, const CVec& base,
                     const CVec& d1, const CVec& d2) {
  check_samples(g, base.size(), "two_form_eval");
  check_samples(g, d1.size(), "two_form_eval");
  check_samples(g, d2.size(), "two_form_eval");
  switch (kind) {
    case TwoFormKind::canonical_nse:
      return nse_pairing(g, d1, d2);
    case TwoFormKind::leo_nse: {
      const CVec dx1 = spectral_derivative(g, d1, 1);
      const CVec dx2 = spectral_derivative(g, d2, 1);
      Vec rho1(g.N), rho2(g.N);
      for (int j = 0; j < g.N; ++j) {
        rho1[j] = 2.0 * (std::conj(base[j]) * d1[j]).real();
        rho2[j] = 2.0 * (std::conj(base[j]) * d2[j]).real();
      }
      const Vec dphi1 = antiderivative(g, rho1, Anchor::left_anchored);
      const Vec dphi2 = antiderivative(g, rho2, Anchor::left_anchored);
      cplx acc = 0.0;
      for (int j = 0; j < g.N; ++j) {
        acc += dx1[j] * std::conj(d2[j]) - dx2[j] * std::conj(d1[j]);
        acc += base[j] * (dphi1[j] * std::conj(d2[j]) -
                          dphi2[j] * std::conj(d1[j]));
        acc += std::conj(base[j]) * (dphi1[j] * d2[j] - dphi2[j] * d1[j]);
      }
      return (acc * g.dx()).real();
    }
    default:
      throw ValidationError("two_form_eval: this kind acts on real fields");
  }
}

double lie_derivative_commutator(
    const Grid&,
    const std::function<double(const Vec&, const Vec&, const Vec&)>& omega,
    const std::function<Vec(const Vec&, double)>& E, const Vec& u,
    const Vec& d1, const Vec& d2, double t) {
  const Vec Ed1 = gateaux_map([&](const Vec& w) { return E(w, t); }, u, d1);
  const Vec Ed2 = gateaux_map([&](const Vec& w) { return E(w, t); }, u, d2);
  const double term0 =
      gateaux([&](const Vec& w) { return omega(w, d1, d2); }, u, E(u, t));
  return term0 + omega(u, Ed1, d2) + omega(u, d1, Ed2);
}

double lie_derivative_commutator(
    const Grid&,
    const std::function<double(const CVec&, const CVec&, const CVec&)>& omega,
    const std::function<CVec(const CVec&, double)>& E, const CVec& psi,
    const CVec& d1, const CVec& d2, double t) {
  const CVec Ed1 = gateaux_map([&](const CVec& w) { return E(w, t); }, psi, d1);
  const CVec Ed2 = gateaux_map([&](const CVec& w) { return E(w, t); }, psi, d2);
  const double term0 =
      gateaux([&](const CVec& w) { return omega(w, d1, d2); }, psi, E(psi, t));
  return term0 + omega(psi, Ed1, d2) + omega(psi, d1, Ed2);
}

namespace {

void write_snapshot_impl(const std::string& path, const Grid& g,
                         const Vec* rf, const CVec* cf, double t) {
  std::ofstream out(path);
  if (!out) throw IoError("write_snapshot: cannot open " + path);
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  out << "# L=" << g.L << " N=" << g.N << " kind="
      << (cf ? "complex" : "real") << " t=" << t << "\n";
  const Vec xs = g.x();
  for (int j = 0; j < g.N; ++j) {
    if (cf)
      out << xs[j] << " " << (*cf)[j].real() << " " << (*cf)[j].imag() << "\n";
    else
      out << xs[j] << " " << (*rf)[j] << "\n";
  }
  if (!out) throw IoError("write_snapshot: write failed for " + path);
}

}  // namespace

void write_snapshot(const std::string& path, const Grid& g, const Vec& f,
                    double t) {
  check_samples(g, f.size(), "write_snapshot");
  write_snapshot_impl(path, g, &f, nullptr, t);
}

void write_snapshot(const std::string& path, const Grid& g, const CVec& f,
                    double t) {
  check_samples(g, f.size(), "write_snapshot");
  write_snapshot_impl(path, g, nullptr, &f, t);
}

Snapshot read_snapshot(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_snapshot: cannot open " + path);
  in.imbue(std::locale::classic());
  std::string header;
  if (!std::getline(in, header))
    throw IoError("read_snapshot: empty file " + path);
  double L = 0.0, t = 0.0;
  int N = 0;
  std::string kind;
  {
    std::istringstream hs(header);
    hs.imbue(std::locale::classic());
    std::string hash, tok;
    hs >> hash;
    if (hash != "#") throw IoError("read_snapshot: bad header in " + path);
    while (hs >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos)
        throw IoError("read_snapshot: bad header token '" + tok + "'");
      const std::string key = tok.substr(0, eq);
      const std::string val = tok.substr(eq + 1);
      std::istringstream vs(val);
      vs.imbue(std::locale::classic());
      if (key == "L")
        vs >> L;
      else if (key == "N")
        vs >> N;
      else if (key == "t")
        vs >> t;
      else if (key == "kind")
        kind = val;
      else
        throw IoError("read_snapshot: unknown header key '" + key + "'");
      if (key != "kind" && vs.fail())
        throw IoError("read_snapshot: cannot parse header value '" + val +
                      "'");
    }
  }
  if (kind != "real" && kind != "complex")
    throw IoError("read_snapshot: kind must be real or complex");
  Snapshot snap;
  try {
    snap.grid = Grid::make(L, N);
  } catch (const ValidationError& e) {
    throw IoError(std::string("read_snapshot: invalid grid: ") + e.what());
  }
  snap.is_complex = kind == "complex";
  snap.t = t;
  if (snap.is_complex)
    snap.complex_samples.resize(N);
  else
    snap.real_samples.resize(N);
  for (int j = 0; j < N; ++j) {
    double x = 0.0, re = 0.0, im = 0.0;
    if (!(in >> x >> re))
      throw IoError("read_snapshot: truncated data at row " +
                    std::to_string(j));
    if (snap.is_complex) {
      if (!(in >> im))
        throw IoError("read_snapshot: missing imaginary part at row " +
                      std::to_string(j));
      snap.complex_samples[j] = cplx(re, im);
    } else {
      snap.real_samples[j] = re;
    }
  }
  return snap;
}

}  // namespace binoether::fieldkit
