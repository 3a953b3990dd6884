#include "rrf/ado3d.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <boost/math/special_functions/expm1.hpp>
#include <boost/multiprecision/mpfr.hpp>
#include <fmt/format.h>
#include <numbers>

namespace rrf {

namespace mpx = boost::multiprecision;
using mpreal = mpx::number<mpx::mpfr_float_backend<60>, mpx::et_off>;

namespace detail {

// m = 0 modes redone in 60 digits: the beam kernel sums terms of size
// (k_z/xi)^l_max that cancel to the decaying particular solution.
struct BeamTable {
  double albedo = 0.0;
  int L = 0;
  std::vector<mpreal> beta;
  std::vector<mpreal> xi;
  std::vector<std::vector<mpreal>> g;  // g_l(xi), l = 0..L
  std::vector<mpreal> n0;
};

}  // namespace detail

namespace {

constexpr double kPi = std::numbers::pi;

// Gauss-Legendre on (0,1) polished in extended precision from the double rule
void half_rule_mp(const HalfRangeRule& r, std::vector<mpreal>& mu, std::vector<mpreal>& w) {
  const int N = r.N;
  mu.resize(N);
  w.resize(N);
  for (int i = 0; i < N; ++i) {
    mpreal x = 2 * mpreal(r.mu[i]) - 1, p, dp;
    for (int it = 0; it < 8; ++it) {
      mpreal p0 = 1, p1 = x;
      for (int k = 2; k <= N; ++k) {
        mpreal p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      p = (N == 1) ? x : p1;
      mpreal pm = (N == 1) ? mpreal(1) : p0;
      dp = N * (x * p - pm) / (x * x - 1);
      mpreal dx = p / dp;
      x -= dx;
      if (abs(dx) < mpreal("1e-58")) break;
    }
    mu[i] = (x + 1) / 2;
    w[i] = 1 / ((1 - x * x) * dp * dp);
  }
}

template <class T>
std::vector<T> chandra0(const std::vector<T>& beta, double albedo, int L, const T& xi) {
  std::vector<T> g(L + 1);
  g[0] = 1;
  if (L >= 1) g[1] = xi * (1 - albedo * beta[0]);
  for (int l = 1; l < L; ++l) g[l + 1] = (xi * (2 * l + 1 - albedo * beta[l]) * g[l] - l * g[l - 1]) / (l + 1);
  return g;
}

std::shared_ptr<detail::BeamTable> make_beam_table(const AdoSpectrum& spec) {
  auto t = std::make_shared<detail::BeamTable>();
  const int L = spec.l_max;
  const int N = spec.rule.N;
  t->albedo = spec.albedo;
  t->L = L;
  for (double b : spec.beta) t->beta.push_back(mpreal(b));
  std::vector<mpreal> mu, w;
  half_rule_mp(spec.rule, mu, w);
  // nodes over both halves with P_l(mu_i) tabulated
  std::vector<mpreal> node(2 * N), wt(2 * N);
  std::vector<std::vector<mpreal>> P(2 * N, std::vector<mpreal>(L + 1));
  for (int i = 0; i < 2 * N; ++i) {
    node[i] = i < N ? mu[i] : -mu[i - N];
    wt[i] = i < N ? w[i] : w[i - N];
    P[i][0] = 1;
    if (L >= 1) P[i][1] = node[i];
    for (int l = 1; l < L; ++l) P[i][l + 1] = ((2 * l + 1) * node[i] * P[i][l] - l * P[i][l - 1]) / (l + 1);
  }
  const double om = spec.albedo;
  auto phi_values = [&](const mpreal& xi, const std::vector<mpreal>& g) {
    std::vector<mpreal> phi(2 * N);
    for (int i = 0; i < 2 * N; ++i) {
      mpreal G = 0;
      for (int l = 0; l <= L; ++l) G += t->beta[l] * g[l] * P[i][l];
      phi[i] = om * xi * G / (2 * (xi - node[i]));
    }
    return phi;
  };
  // discrete dispersion: sum_i w_i phi_i - 1 with phi built from the recurrence
  auto lambda = [&](const mpreal& xi) {
    auto phi = phi_values(xi, chandra0(t->beta, om, L, xi));
    mpreal s = 0;
    for (int i = 0; i < 2 * N; ++i) s += wt[i] * phi[i];
    return s - 1;
  };
  for (const auto& md : spec.blocks[0].modes) {
    mpreal x0 = md.xi, x1 = md.xi * (1 + 1e-9);
    mpreal f0 = lambda(x0), f1 = lambda(x1);
    for (int it = 0; it < 80 && f1 != f0; ++it) {
      mpreal x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
      x0 = x1;
      f0 = f1;
      x1 = x2;
      f1 = lambda(x1);
      if (abs(x1 - x0) < mpreal("1e-56") * abs(x1)) break;
    }
    if (abs(x1 - md.xi) > 1e-8 * md.xi)
      throw NumericError(fmt::format("ado: polishing xi = {} drifted to {}", md.xi, x1.convert_to<double>()));
    auto g = chandra0(t->beta, om, L, x1);
    auto phi = phi_values(x1, g);
    mpreal n0 = 0;
    for (int i = 0; i < 2 * N; ++i) n0 += wt[i] * node[i] * phi[i] * phi[i];
    t->xi.push_back(x1);
    t->g.push_back(std::move(g));
    t->n0.push_back(n0);
  }
  return t;
}

AdoBlock build_block(const Medium& medium, const HalfRangeRule& rule, int m) {
  const int N = rule.N;
  const int L = medium.l_max();
  const double c = 0.5 * medium.albedo();
  // W_pm = K_pm D with K symmetric and D = diag(w_j (1-mu_j^2)^m)
  Eigen::MatrixXd Kp = Eigen::MatrixXd::Zero(N, N), Km = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd D(N), mu(N);
  std::vector<std::vector<double>> p(N);
  for (int i = 0; i < N; ++i) {
    mu[i] = rule.mu[i];
    D[i] = rule.w[i] * std::pow(1.0 - mu[i] * mu[i], m);
    p[i] = p_poly_all<double>(L, m, mu[i]);
  }
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      double sp = 0.0, sm = 0.0;
      for (int l = m; l <= L; ++l) {
        double t = medium.beta(l) * p[i][l - m] * p[j][l - m];
        sp += t;
        sm += ((l - m) % 2 ? -t : t);
      }
      Kp(i, j) = sp;
      Km(i, j) = sm;
    }
  // A_pm = D^{-1} - c (K_p pm K_m), so I - c(W_p pm W_m) = A_pm D
  Eigen::MatrixXd Ap = -c * (Kp + Km), Am = -c * (Kp - Km);
  for (int i = 0; i < N; ++i) {
    Ap(i, i) += 1.0 / D[i];
    Am(i, i) += 1.0 / D[i];
  }
  // E_- E_+ = A_- G A_+ G with G = D Xi^{-1}; similar to S_- S_+, S = G^{1/2} A G^{1/2}
  Eigen::VectorXd Gh(N);
  for (int i = 0; i < N; ++i) Gh[i] = std::sqrt(D[i] / mu[i]);
  Eigen::MatrixXd Sp = Gh.asDiagonal() * Ap * Gh.asDiagonal();
  Eigen::MatrixXd Sm = Gh.asDiagonal() * Am * Gh.asDiagonal();

  Eigen::VectorXd lam(N);
  Eigen::MatrixXd X(N, N);  // columns proportional to G^{1/2} Xi U
  Eigen::LLT<Eigen::MatrixXd> llt(Sp);
  if (llt.info() == Eigen::Success) {
    Eigen::MatrixXd Lc = llt.matrixL();
    Eigen::MatrixXd C = Lc.transpose() * Sm * Lc;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (C + C.transpose()));
    if (es.info() != Eigen::Success) throw NumericError(fmt::format("ado: eigensolver failed for m = {}", m));
    lam = es.eigenvalues();
    X = Lc.transpose().triangularView<Eigen::Upper>().solve(es.eigenvectors());
  } else {
    Eigen::MatrixXd P = Sm * Sp;
    Eigen::EigenSolver<Eigen::MatrixXd> es(P);
    if (es.info() != Eigen::Success) throw NumericError(fmt::format("ado: eigensolver failed for m = {}", m));
    for (int k = 0; k < N; ++k) {
      cplx e = es.eigenvalues()[k];
      if (std::abs(e.imag()) > 1e-10 * std::abs(e))
        throw NumericError(fmt::format("ado: complex xi^2 for m = {} (1/xi^2 = {}{:+}i)", m, e.real(), e.imag()));
      lam[k] = e.real();
      X.col(k) = es.eigenvectors().col(k).real();
    }
  }
  for (int k = 0; k < N; ++k)
    if (!(lam[k] > 0.0))
      throw NumericError(fmt::format("ado: nonpositive 1/xi^2 = {} for m = {}", lam[k], m));
  // repeated eigenvalue with parallel eigenvectors means a deficient eigenspace
  for (int a = 0; a < N; ++a)
    for (int b = a + 1; b < N; ++b)
      if (std::abs(lam[a] - lam[b]) < 1e-12 * std::max(lam[a], lam[b])) {
        double cs = std::abs(X.col(a).normalized().dot(X.col(b).normalized()));
        if (cs > 1.0 - 1e-8) throw NumericError(fmt::format("ado: defective eigenvalue for m = {}", m));
      }

  Eigen::PartialPivLU<Eigen::MatrixXd> lu_minus(Am * D.asDiagonal());
  AdoBlock blk;
  blk.m = m;
  for (int k = 0; k < N; ++k) {
    AdoMode md;
    md.xi = 1.0 / std::sqrt(lam[k]);
    Eigen::VectorXd XiU = X.col(k).cwiseQuotient(Gh);
    Eigen::VectorXd U = XiU.cwiseQuotient(mu);
    Eigen::VectorXd V = lu_minus.solve(XiU / md.xi);
    md.phi.resize(2 * N);
    for (int i = 0; i < N; ++i) {
      md.phi[i] = 0.5 * (U[i] + V[i]);
      md.phi[N + i] = 0.5 * (U[i] - V[i]);
    }
    double s = 0.0;
    for (int i = 0; i < 2 * N; ++i) s += rule.weight(i) * md.phi[i] * std::pow(1.0 - mu[i % N] * mu[i % N], 0.5 * m);
    if (s == 0.0) throw NumericError(fmt::format("ado: mode xi = {} of m = {} cannot be normalized", md.xi, m));
    for (double& v : md.phi) v /= s;
    md.g.assign(L - m + 1, 0.0);
    md.n0 = 0.0;
    for (int i = 0; i < 2 * N; ++i) {
      const double x = rule.node(i), wi = rule.weight(i);
      const double wm = std::pow(1.0 - x * x, m);
      auto px = p_poly_all<double>(L, m, x);
      for (int l = m; l <= L; ++l) md.g[l - m] += wi * px[l - m] * md.phi[i] * wm;
      md.n0 += wi * x * md.phi[i] * md.phi[i] * wm;
    }
    blk.modes.push_back(std::move(md));
  }
  std::sort(blk.modes.begin(), blk.modes.end(), [](const AdoMode& a, const AdoMode& b) { return a.xi > b.xi; });
  return blk;
}

// g_l^m(sign*xi) for signed m from the stored |m| moments
double g_signed(const AdoSpectrum& spec, int m, const AdoMode& md, int l, int sign) {
  const int am = std::abs(m);
  double v = md.g[l - am];
  if (sign < 0 && ((l - am) % 2)) v = -v;
  if (m < 0 && (am % 2)) v = -v;
  (void)spec;
  return v;
}

ShExpansion moment_expansion(const AdoSpectrum& spec, int m, const AdoMode& md, int sign) {
  ShExpansion f(spec.l_max);
  for (int l = std::abs(m); l <= spec.l_max; ++l)
    f.at(l, m) = std::sqrt(kPi / (2.0 * l + 1.0)) * spec.beta[l] * g_signed(spec, m, md, l, sign);
  return f;
}

}  // namespace

const AdoBlock& AdoSpectrum::block(int m) const {
  const int am = std::abs(m);
  if (am > l_max) throw ConfigError(fmt::format("ado: order {} exceeds l_max {}", m, l_max));
  return blocks[am];
}

const AdoMode& AdoSpectrum::mode(int m, int n) const {
  const auto& b = block(m);
  if (n < 0 || n >= static_cast<int>(b.modes.size())) throw ConfigError(fmt::format("ado: mode index {} out of range", n));
  return b.modes[n];
}

double AdoSpectrum::normalization(int m, int n, double q) const {
  const double xi = mode(m, n).xi;
  return 2.0 * kPi * std::sqrt(1.0 + xi * xi * q * q) * mode(m, n).n0;
}

AdoSpectrum build_spectrum(const Medium& medium, int N) {
  const int L = medium.l_max();
  if (N < L / 2 + 1) throw ConfigError(fmt::format("ado: N = {} is below l_max/2 + 1 = {}", N, L / 2 + 1));
  if (!(medium.albedo() < 1.0)) throw ConfigError("ado: albedo must be < 1");
  AdoSpectrum s;
  s.rule = gauss_legendre_half(N);
  s.l_max = L;
  s.albedo = medium.albedo();
  s.beta = medium.beta();
  s.blocks.resize(L + 1);
  std::vector<std::string> errors(L + 1);
#pragma omp parallel for schedule(dynamic)
  for (int m = 0; m <= L; ++m) {
    try {
      s.blocks[m] = build_block(medium, s.rule, m);
    } catch (const std::exception& e) {
      errors[m] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericError(e);
  s.beam = make_beam_table(s);
  return s;
}

cplx eigenfunction(const AdoSpectrum& spec, int m, int n, double mu, double phi, int sign) {
  const auto& md = spec.mode(m, n);
  const double xi = sign * md.xi;
  if (xi == mu) throw NumericError("ado: eigenfunction evaluated at its pole");
  cplx s = 0.0;
  for (int l = std::abs(m); l <= spec.l_max; ++l)
    s += std::sqrt(kPi / (2.0 * l + 1.0)) * spec.beta[l] * g_signed(spec, m, md, l, sign) * sph_harm(l, m, mu, phi);
  const double par = (std::abs(m) % 2) ? -1.0 : 1.0;
  return par * spec.albedo * xi / (xi - mu) * s;
}

cplx RotatedMode::operator()(double mu, double phi) const {
  return prefactor / (frame.nu - rotated_mu(frame, mu, phi)) * evaluate(coeffs, mu, phi);
}

RotatedMode rotate_mode(const AdoSpectrum& spec, int m, int n, double q, double phi_q, int sign) {
  const auto& md = spec.mode(m, n);
  const double xi = sign * md.xi;
  RotatedMode r;
  r.frame = make_frame(xi, q, phi_q);
  r.coeffs = rotate(r.frame, moment_expansion(spec, m, md, sign));
  r.prefactor = ((std::abs(m) % 2) ? -1.0 : 1.0) * spec.albedo * xi;
  return r;
}

cplx rotated_eigenfunction(const AdoSpectrum& spec, int m, int n, double q, double phi_q, double mu, double phi,
                           int sign) {
  return rotate_mode(spec, m, n, q, phi_q, sign)(mu, phi);
}

cplx dom_mu_product(const AdoSpectrum& spec, const RotatedMode& a, const RotatedMode& b, int K) {
  cplx acc = 0.0;
  for (int i = 0; i < 2 * spec.rule.N; ++i) {
    const double mu = spec.rule.node(i);
    cplx t = 0.0;
    for (int k = 0; k < K; ++k) {
      const double ph = 2.0 * kPi * (k + 0.5) / K;
      t += a(mu, ph) * b(mu, ph);
    }
    acc += spec.rule.weight(i) * mu * t * (2.0 * kPi / K);
  }
  return acc;
}

Eigen::MatrixXcd dom_mu_gram(const AdoSpectrum& spec, const std::vector<RotatedMode>& modes, int K) {
  const int nn = 2 * spec.rule.N;
  const auto n = static_cast<Eigen::Index>(modes.size());
  Eigen::MatrixXcd v(n, static_cast<Eigen::Index>(nn) * K);
  Eigen::VectorXd wt(v.cols());
  for (int i = 0; i < nn; ++i) {
    const double mu = spec.rule.node(i);
    for (int k = 0; k < K; ++k) {
      const double ph = 2.0 * kPi * (k + 0.5) / K;
      const auto c = static_cast<Eigen::Index>(i) * K + k;
      wt(c) = spec.rule.weight(i) * mu * 2.0 * kPi / K;
      for (Eigen::Index a = 0; a < n; ++a) v(a, c) = modes[static_cast<std::size_t>(a)](mu, ph);
    }
  }
  return v * wt.asDiagonal() * v.transpose();
}

double decay_rate(double xi, double q) { return std::sqrt(1.0 + xi * xi * q * q) / xi; }

double c_function(double tau, double s, double eta) {
  if (std::abs(s - eta) < 1e-8 * std::abs(s)) return tau / (s * s) * std::exp(-tau / s);
  // e^{-tau/s} (1 - e^{-tau (s - eta)/(s eta)}) / (s - eta)
  return std::exp(-tau / s) * -boost::math::expm1(-tau * (s - eta) / (s * eta)) / (s - eta);
}

cplx scattered_intensity_fourier(const AdoSpectrum& spec, double q, double phi_q, double z, double mu, double phi) {
  const int L = spec.l_max;
  cplx total = 0.0;
  for (int m = -L; m <= L; ++m) {
    const auto& blk = spec.block(m);
    for (int n = 0; n < static_cast<int>(blk.modes.size()); ++n) {
      const auto& md = blk.modes[n];
      const double xi = md.xi;
      const double kz = std::sqrt(1.0 + xi * xi * q * q);
      auto d = wigner_d_complex(L, xi * q);
      cplx sp = 0.0, sm = 0.0;
      for (int l = std::abs(m); l <= L; ++l) {
        sp += spec.beta[l] * g_signed(spec, m, md, l, 1) * d[l](0, m);
        sm += spec.beta[l] * g_signed(spec, m, md, l, -1) * d[l](0, m);
      }
      const double pre = ((std::abs(m) % 2) ? -1.0 : 1.0) * xi / (kz * spec.normalization(m, n, q));
      cplx br;
      if (z >= 0.0) {
        cplx r1 = rotated_eigenfunction(spec, m, n, q, phi_q, mu, phi, 1);
        cplx r2 = rotated_eigenfunction(spec, m, n, q, phi_q, mu, phi, -1);
        br = c_function(z, 1.0, xi / kz) * r1 * sp + std::exp(-z) * kz / (xi + kz) * r2 * sm;
      } else {
        cplx r2 = rotated_eigenfunction(spec, m, n, q, phi_q, mu, phi, -1);
        br = std::exp(kz * z / xi) * kz / (xi + kz) * r2 * sm;
      }
      total += pre * br;
    }
  }
  return 0.5 * spec.albedo * total;
}

double beam_kernel(const AdoSpectrum& spec, double q, double z) {
  const auto& t = *spec.beam;
  const int L = t.L;
  const mpreal Q = q, Z = z, ez = exp(-Z);
  const mpreal two_pi = 2 * boost::math::constants::pi<mpreal>();
  mpreal F = 0, mag = 0;
  std::vector<mpreal> P(L + 1);
  for (std::size_t n = 0; n < t.xi.size(); ++n) {
    const mpreal& xi = t.xi[n];
    const mpreal kz = sqrt(1 + xi * xi * Q * Q);
    P[0] = 1;
    if (L >= 1) P[1] = kz;
    for (int l = 1; l < L; ++l) P[l + 1] = ((2 * l + 1) * kz * P[l] - l * P[l - 1]) / (l + 1);
    mpreal sp = 0, sm = 0;
    for (int l = 0; l <= L; ++l) {
      mpreal v = t.beta[l] * t.g[n][l] * P[l];
      sp += v;
      sm += (l % 2) ? -v : v;
    }
    const mpreal pre = xi / (two_pi * kz * t.n0[n]);
    mpreal term;
    if (z >= 0.0) {
      const mpreal delta = kz - xi;
      mpreal ct = (delta == 0) ? ez * Z / xi : ez * -boost::math::expm1(mpreal(-delta * Z / xi)) / delta;
      term = pre * (sp * ct + ez * sm / (kz + xi));
    } else {
      term = pre * exp(kz * Z / xi) * sm / (kz + xi);
    }
    F += term;
    mag += abs(term);
  }
  const double f = F.convert_to<double>();
  if (mag > mpreal("1e44") * abs(F) && mag > 0)
    throw NumericError(fmt::format("ado: beam kernel cancellation beyond working precision at q = {}", q));
  return f;
}

double energy_density_beam(const AdoSpectrum& spec, const Medium& medium, double rho, double z) {
  if (rho < 0.0) throw ConfigError("ado: rho must be >= 0");
  const double mt = medium.mu_t();
  const double r = rho * mt, zz = z * mt;
  if (r == 0.0 && zz >= 0.0) throw ConfigError("ado: energy density is singular on the beam axis for z >= 0");
  HankelOptions opt;
  opt.rtol = 1e-8;
  opt.atol = 1e-14;
  opt.q_scale = 1e12;
  auto res = hankel_integral([&](double q) { return beam_kernel(spec, q, zz); }, 0, r, opt);
  if (!res.converged)
    throw NumericError(fmt::format("ado: Hankel integral did not converge at rho = {}, z = {} (err {})", rho, z, res.error));
  return mt * mt * 0.5 * spec.albedo * res.value;
}

}  // namespace rrf
