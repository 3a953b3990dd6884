#include "rrf/caseology.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <map>
#include <mutex>
#include <numbers>

#include "rrf/quadrature.hpp"

namespace rrf {

namespace {

const Rule& cached_gl(int n) {
  static std::mutex mtx;
  static std::map<int, Rule> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
  return it->second;
}

template <class T>
T g_sum(const Medium& medium, int m, const ChandraTable<T>& gt, T mu) {
  const int am = std::abs(m);
  const int L = medium.l_max();
  if (L < am) return T(0);
  auto p = p_poly_all<T>(L, m, mu);
  T s(0);
  for (int l = am; l <= L; ++l) {
    const int i = l - am;
    s += std::ldexp(1.0, gt.expo[i]) * (medium.beta(l) * p[i] * gt.mant[i]);
  }
  return s;
}

template <class T>
T weight_factor(int am, T mu) {
  T w(1);
  for (int k = 0; k < am; ++k) w *= (T(1) - mu * mu);
  return w;
}

// int_{-1}^{1} N(mu) / (nu - mu) dmu with N = g^m(nu, mu) (1-mu^2)^|m|, by
// subtracting N(nu); on the cut the value is the principal part
template <class T>
T cauchy_by_subtraction(const Medium& medium, int m, T nu, bool on_cut) {
  const int am = std::abs(m);
  const int L = std::max(medium.l_max(), am);
  auto gt = chandra_g<T>(medium, m, nu, L);
  const int degree = medium.l_max() + am;
  auto N = [&](T mu) { return g_sum(medium, m, gt, mu) * weight_factor(am, mu); };
  const Rule& r = cached_gl(std::max(16, degree / 2 + 2));
  const T Nnu = N(nu);
  T acc(0);
  for (std::size_t i = 0; i < r.x.size(); ++i) acc += r.w[i] * (N(T(r.x[i])) - Nnu) / (nu - r.x[i]);
  T logpart;
  if constexpr (std::is_same_v<T, double>) {
    logpart = on_cut ? std::log((1.0 + nu) / (1.0 - nu)) : std::log((nu + 1.0) / (nu - 1.0));
  } else {
    logpart = std::log((nu + 1.0) / (nu - 1.0));
  }
  return acc + Nnu * logpart;
}

// Off the cut: q_l = (1/2) int p_l^m (1-mu^2)^|m| / (nu - mu) dmu is the minimal
// solution of the p-recurrence for l > |m|, so the ratios come from a backward
// continued fraction and sum_l beta_l g_l q_l never cancels.
template <class T>
T cauchy_by_recurrence(const Medium& medium, int m, T nu, double rho) {
  const int am = std::abs(m);
  const int Lmax = medium.l_max();
  if (Lmax < am) return T(0);
  const double seed = std::sqrt(factorial(2 * am)) / (std::ldexp(1.0, am) * factorial(am)) *
                      ((m < 0 && (am % 2)) ? -1.0 : 1.0);
  const double a1 = std::sqrt(double(2 * am + 1));  // p_{m+1} = sqrt(2m+1) mu p_m

  T q0, q1;
  if (rho > 3.0) {
    const Rule& r = cached_gl(64 + 2 * am);
    q0 = q1 = T(0);
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      double mu = r.x[i];
      T w = r.w[i] * std::pow(1.0 - mu * mu, am) / (nu - mu);
      q0 += w;
      q1 += w * mu * mu;  // the constant part of 1/(nu-mu) integrates p_{m+1} w to zero
    }
    q0 *= 0.5 * seed;
    q1 *= 0.5 * seed * a1 / nu;
  } else {
    const Rule& r = cached_gl(am + 4);
    const T lg = std::log((nu + 1.0) / (nu - 1.0));
    const T wnu = weight_factor(am, nu);
    T s0(0), s1(0);
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      double mu = r.x[i];
      T w = weight_factor(am, T(mu));
      s0 += r.w[i] * (w - wnu) / (nu - mu);
      s1 += r.w[i] * (mu * w - nu * wnu) / (nu - mu);
    }
    q0 = 0.5 * seed * (s0 + wnu * lg);
    q1 = 0.5 * seed * a1 * (s1 + nu * wnu * lg);
  }
  if (Lmax == am) {
    return 2.0 * medium.beta(am) * seed * q0;
  }

  // ratios q_l / q_{l-1} for l >= |m| + 2
  const int depth = static_cast<int>(std::ceil(40.0 / (2.0 * std::log(rho)))) + 10;
  const int top = Lmax + std::min(depth, 1000000);
  std::vector<T> ratio(static_cast<std::size_t>(Lmax - am) + 1, T(0));
  T rr(0);
  for (int l = top; l >= am + 2; --l) {
    const double al = std::sqrt(double(l) * l - double(am) * am);
    const double al1 = std::sqrt(double(l + 1) * (l + 1) - double(am) * am);
    rr = al / ((2.0 * l + 1.0) * nu - al1 * rr);
    if (l <= Lmax) ratio[l - am] = rr;
  }

  auto gt = chandra_g<T>(medium, m, nu, Lmax);
  T acc = medium.beta(am) * gt.value(am) * q0;
  T qm = q1;
  int qe = 0;
  for (int l = am + 1; l <= Lmax; ++l) {
    if (l >= am + 2) qm *= ratio[l - am];
    double mag = std::abs(qm);
    if (mag < 0x1p-200 && mag > 0.0) {
      qm *= std::ldexp(1.0, 200);
      qe -= 200;
    }
    const int i = l - am;
    acc += std::ldexp(1.0, gt.expo[i] + qe) * (medium.beta(l) * gt.mant[i] * qm);
  }
  return 2.0 * acc;
}

template <class T>
T cauchy_integral(const Medium& medium, int m, T nu, bool on_cut) {
  if (!on_cut) {
    cplx z(nu);
    cplx s = std::sqrt(z - 1.0) * std::sqrt(z + 1.0);
    double rho = std::max(std::abs(z + s), std::abs(z - s));
    if (rho > 1.001) return cauchy_by_recurrence<T>(medium, m, nu, rho);
  }
  return cauchy_by_subtraction<T>(medium, m, nu, on_cut);
}

double dlambda_dnu(const Medium& medium, int m, double nu) {
  auto D = [&](double h) { return (dispersion(medium, m, nu + h) - dispersion(medium, m, nu - h)) / (2.0 * h); };
  const double h = 1e-6 * std::abs(nu);
  return (4.0 * D(h / 2.0) - D(h)) / 3.0;
}

}  // namespace

double g_nu_mu(const Medium& medium, int m, double nu, double mu) {
  const int am = std::abs(m);
  if (medium.l_max() < am) return 0.0;
  auto gt = chandra_g<double>(medium, m, nu, medium.l_max());
  return g_sum(medium, m, gt, mu);
}

cplx g_nu_mu(const Medium& medium, int m, cplx nu, cplx mu) {
  const int am = std::abs(m);
  if (medium.l_max() < am) return 0.0;
  auto gt = chandra_g<cplx>(medium, m, nu, medium.l_max());
  return g_sum(medium, m, gt, mu);
}

cplx dispersion(const Medium& medium, int m, cplx nu) {
  if (nu.imag() == 0.0 && std::abs(nu.real()) <= 1.0)
    throw ConfigError("dispersion: nu on the cut [-1, 1]; use lambda_continuum");
  return 1.0 - 0.5 * medium.albedo() * nu * cauchy_integral<cplx>(medium, m, nu, false);
}

double dispersion(const Medium& medium, int m, double nu) {
  if (std::abs(nu) <= 1.0) throw ConfigError("dispersion: nu on the cut [-1, 1]; use lambda_continuum");
  return 1.0 - 0.5 * medium.albedo() * nu * cauchy_integral<double>(medium, m, nu, false);
}

std::pair<std::vector<double>, std::vector<double>> a_matrix(const Medium& medium, int m, int l_B) {
  const int am = std::abs(m);
  if (l_B < am + 2) throw ConfigError("a_matrix: l_B must be >= |m| + 2");
  const int n = l_B - am + 1;
  std::vector<double> diag(n, 0.0), off(n - 1);
  for (int l = am + 1; l <= l_B; ++l) {
    double hp = medium.h(l - 1), hl = medium.h(l);
    if (hp <= 0.0 || hl <= 0.0) throw ConfigError("a_matrix: h_l must be positive (albedo < 1 for m = 0)");
    off[l - am - 1] = std::sqrt(double(l * l - am * am)) / std::sqrt(hp * hl);
  }
  return {diag, off};
}

DiscreteSpectrum discrete_eigenvalues(const Medium& medium, int m, int l_B) {
  const int am = std::abs(m);
  if (l_B != 0 && l_B < am + 2) throw ConfigError("discrete_eigenvalues: l_B must be >= |m| + 2");
  int lb = l_B ? l_B : std::max(am + 2, 2 * medium.l_max() + 32);
  constexpr int cap = 1 << 14;
  constexpr double margin = 1e-9;

  auto solve = [&](int order) {
    auto [d, e] = a_matrix(medium, m, order);
    Eigen::Map<Eigen::VectorXd> dv(d.data(), d.size()), ev(e.data(), e.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(dv, ev, Eigen::EigenvaluesOnly);
    std::vector<double> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()[i] > 1.0 + margin) out.push_back(es.eigenvalues()[i]);
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
  };

  // a sign change of Lambda over (1, inf) guarantees at least one root, which
  // the matrix only resolves once l_B is large compared with 1/sqrt(nu - 1)
  const double near = dispersion(medium, m, 1.0 + 1e-9), far = dispersion(medium, m, 1e8);
  const std::size_t at_least = (near < 0.0) != (far < 0.0) ? 1 : 0;

  auto prev = solve(lb);
  while (true) {
    if (2 * lb > cap) throw NumericError("discrete_eigenvalues: no convergence up to l_B = " + std::to_string(cap));
    auto next = solve(2 * lb);
    lb *= 2;
    bool same = next.size() == prev.size();
    for (std::size_t i = 0; same && i < next.size(); ++i) same = std::abs(next[i] - prev[i]) < 1e-10;
    prev = std::move(next);
    if (same && prev.size() >= at_least) break;
  }
  return DiscreteSpectrum{m, prev, lb};
}

double lambda_continuum(const Medium& medium, int m, double nu) {
  if (std::abs(nu) >= 1.0) throw ConfigError("lambda_continuum: |nu| must be < 1");
  if (nu == 0.0) return 1.0;
  return 1.0 - 0.5 * medium.albedo() * nu * cauchy_integral<double>(medium, m, nu, true);
}

NormFactor norm_factor(const Medium& medium, int m, double nu) {
  if (nu == 0.0) throw ConfigError("norm_factor: nu must be nonzero");
  if (std::abs(nu) == 1.0) throw ConfigError("norm_factor: |nu| = 1 is neither discrete nor continuum");
  const int am = std::abs(m);
  const double w = medium.albedo();
  const double gnn = g_nu_mu(medium, m, nu, nu);
  if (std::abs(nu) > 1.0) {
    // normalized so that N = int mu phi^2 (1-mu^2)^|m| dmu
    return {m, nu, 0.5 * w * nu * nu * gnn * dlambda_dnu(medium, m, nu)};
  }
  const double wf = std::pow(1.0 - nu * nu, am);
  const double lam = lambda_continuum(medium, m, nu);
  const double im = std::numbers::pi * 0.5 * w * nu * gnn * wf;
  return {m, nu, nu * (lam * lam + im * im) / wf};
}

double energy_density_isotropic_source(const Medium& medium, const DiscreteSpectrum& spec0, double dz) {
  if (!(dz > 0.0)) throw ConfigError("energy_density: dz must be > 0");
  if (medium.albedo() >= 1.0) throw ConfigError("energy_density: albedo must be < 1");
  double sum = 0.0;
  for (double nu : spec0.nu) sum += std::exp(-dz / nu) / (nu * norm_factor(medium, 0, nu).value);
  auto f = [&](double nu) {
    if (nu <= 0.0 || nu >= 1.0) return 0.0;
    double e = std::exp(-dz / nu);
    if (e == 0.0) return 0.0;
    return e / (nu * norm_factor(medium, 0, nu).value);
  };
  sum += integrate_finite(f, 0.0, 1.0, 1e-10);
  const double mt = medium.mu_t();
  return mt * mt * sum / dz;
}

double energy_density_isotropic_source(const Medium& medium, double dz) {
  if (!(dz > 0.0)) throw ConfigError("energy_density: dz must be > 0");
  return energy_density_isotropic_source(medium, discrete_eigenvalues(medium, 0), dz);
}

std::pair<double, double> nu0_bracket(const Medium& medium) {
  const double ma = medium.mu_a(), ms = medium.mu_s(), mt = medium.mu_t(), g = medium.g();
  if (!(ma > 0.0)) throw ConfigError("nu0_bracket: mu_a must be > 0");
  const double eta = 0.8 * ma / (ma + ms * (1.0 - g * g));
  const double lo = std::sqrt(1.0 + eta) / std::sqrt(3.0 * ma / mt * (1.0 - g * ms / mt));
  const double hi = (1.0 + std::sqrt(eta)) / std::sqrt(3.0 * ma / mt * (1.0 - g * ms / mt));
  return {lo, hi};
}

}  // namespace rrf
