#include "rrf/fn3d.hpp"

#include <fmt/format.h>

#include <cmath>
#include <map>
#include <numbers>

#include "rrf/caseology.hpp"
#include "rrf/quadrature.hpp"

namespace rrf {

namespace {

constexpr double kPi = std::numbers::pi;

double sign_pow(int n) { return (n % 2) ? -1.0 : 1.0; }

// coefficient of Y_{L+1,m} in mu Y_Lm (and of Y_{L,m} in mu Y_{L+1,m})
double mu_ladder(int L, int m) {
  if (L <= 0 || std::abs(m) > L) return 0.0;
  return std::sqrt(double(L * L - m * m) / (4.0 * L * L - 1.0));
}

// hemisphere product rule: Gauss-Legendre in mu on (0,1), trapezoid in phi
struct HemiRule {
  std::vector<double> mu, phi, w;
  explicit HemiRule(int n) {
    Rule g = gauss_legendre(n, 0.0, 1.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        mu.push_back(g.x[i]);
        phi.push_back(2.0 * kPi * j / n);
        w.push_back(g.w[i] * 2.0 * kPi / n);
      }
  }
  std::size_t size() const { return w.size(); }
};

// Everything about one weight function w = R_{k(-nu, q0)} Phi^{mp}_{-nu}.
struct Weight {
  const Medium& medium;
  int mp;
  double xi;  // -nu
  Frame frame;
  ShExpansion numerator;
  cplx prefactor;

  Weight(const Medium& med, double q0, double nu, int mp_)
      : medium(med), mp(mp_), xi(-nu), frame(make_frame(-nu, q0, 0.0)) {
    const int L = med.l_max(), am = std::abs(mp);
    ShExpansion f(L);
    if (am <= L) {
      auto g = chandra_g<double>(med, mp, xi, L);
      for (int l = am; l <= L; ++l) f.at(l, mp) = std::sqrt(kPi / (2.0 * l + 1.0)) * med.beta(l) * g.value(l);
    }
    numerator = rotate(frame, f);
    prefactor = sign_pow(am) * med.albedo() * xi;
  }

  // regular part; the delta part never reaches the upper hemisphere
  cplx operator()(double mu, double phi) const {
    return prefactor / (xi - rotated_mu(frame, mu, phi)) * evaluate(numerator, mu, phi);
  }

  // int Y_LM w ds over the sphere
  cplx sphere_moment(int L, int M) const {
    if (std::abs(mp) > L || std::abs(M) > L) return 0.0;
    ShExpansion e(L);
    e.at(L, M) = 1.0;
    ShExpansion r = inverse_rotate(frame, e);
    return r(L, -mp) * sign_pow(std::abs(mp)) * moment(L);
  }

  cplx moment(int L) const {
    if (moments.empty() || L > moments_top) {
      moments_top = std::max(L, medium.l_max() + 1);
      moments = eigen_moments(medium, mp, xi, moments_top);
    }
    return moments[L - std::abs(mp)];
  }
  mutable std::vector<cplx> moments;
  mutable int moments_top = -1;

  cplx full(int l, int m) const {
    return mu_ladder(l + 1, m) * sphere_moment(l + 1, m) + mu_ladder(l, m) * sphere_moment(l - 1, m);
  }
};

std::vector<std::pair<int, int>> unknown_list(int l_max) {
  std::vector<std::pair<int, int>> u;
  for (int m = -l_max; m <= l_max; ++m)
    for (int l = std::abs(m); l <= l_max; l += 2) u.emplace_back(l, m);
  return u;
}

cplx source_from(const Weight& w, double nu) {
  cplx s = 0.0;
  const int L = w.medium.l_max();
  for (int l = 0; l <= L; ++l)
    s += w.medium.beta(l) / std::sqrt(4.0 * kPi * (2.0 * l + 1.0)) * w.sphere_moment(l, 0);
  return 4.0 * kPi * kPi * nu / (nu + w.frame.kz()) * w.medium.albedo() * s;
}

}  // namespace

int FnSystem::column(int l, int m) const {
  for (std::size_t i = 0; i < unknowns.size(); ++i)
    if (unknowns[i].first == l && unknowns[i].second == m) return static_cast<int>(i);
  return -1;
}

cplx FnSolution::at(int l, int m) const {
  for (std::size_t i = 0; i < unknowns.size(); ++i)
    if (unknowns[i].first == l && unknowns[i].second == m) return c_check[static_cast<Eigen::Index>(i)];
  return 0.0;
}

int fn_unknown_count(int l_max) {
  return (l_max % 2) ? (l_max + 1) * (l_max + 3) / 4 : (l_max + 2) * (l_max + 2) / 4;
}

std::vector<double> collocation_values(const Medium& medium, int m, int l_max, bool* overflow) {
  const int am = std::abs(m);
  const int half = (l_max - am) / 2;
  const int n = half + 1;
  std::vector<double> nu = discrete_eigenvalues(medium, am).nu;
  const int M = static_cast<int>(nu.size());
  if (overflow) *overflow = M > n;
  std::vector<double> xi(nu.begin(), nu.begin() + std::min(M, n));
  for (int j = M + 1; j <= n; ++j) xi.push_back(std::cos(0.5 * kPi * (j - M) / (2.0 * half + 3.0 - M)));
  return xi;
}

std::vector<cplx> eigen_moments(const Medium& medium, int m, double nu, int L) {
  const int am = std::abs(m);
  if (L < am) return {};
  std::vector<cplx> out(static_cast<std::size_t>(L - am) + 1);
  auto scale = [&](int l) { return 2.0 * kPi * sign_pow(am) * std::sqrt((2.0 * l + 1.0) / (4.0 * kPi)); };
  if (std::abs(nu) <= 1.0) {
    auto g = chandra_g<double>(medium, m, nu, L);
    for (int l = am; l <= L; ++l) out[l - am] = scale(l) * g.value(l);
    return out;
  }
  // the forward recurrence loses the decaying moments when |nu| is large;
  // the eigenfunction is smooth here, so integrate it directly
  const double a = std::abs(nu);
  const double rho = a + std::sqrt(a * a - 1.0);
  const int n = std::min(4000, static_cast<int>(std::ceil(40.0 / std::log(rho))) + L + 8);
  thread_local std::map<int, Rule> rules;
  auto it = rules.find(n);
  if (it == rules.end()) it = rules.emplace(n, gauss_legendre(n)).first;
  const Rule& r = it->second;
  std::vector<double> acc(out.size(), 0.0);
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    const double mu = r.x[i];
    const double phi = 0.5 * medium.albedo() * nu * g_nu_mu(medium, m, nu, mu) / (nu - mu) * std::pow(1.0 - mu * mu, am);
    auto p = p_poly_all<double>(L, m, mu);
    for (int l = am; l <= L; ++l) acc[l - am] += r.w[i] * phi * p[l - am];
  }
  for (int l = am; l <= L; ++l) out[l - am] = scale(l) * acc[l - am];
  return out;
}

cplx eigen_moment(const Medium& medium, int l, int m, double nu) {
  if (std::abs(m) > l) return 0.0;
  return eigen_moments(medium, m, nu, l).back();
}

FnEntry fn_entry(const Medium& medium, double q0, double xi, int mp, int l, int m, int n_quad) {
  Weight w(medium, q0, xi, mp);
  HemiRule rule(n_quad);
  FnEntry e;
  e.full = w.full(l, m);
  e.hemi = 0.0;
  for (std::size_t k = 0; k < rule.size(); ++k)
    e.hemi += rule.w[k] * rule.mu[k] * sph_harm(l, m, rule.mu[k], rule.phi[k]) * w(rule.mu[k], rule.phi[k]);
  e.value = -sign_pow(l) * (e.full - e.hemi);
  return e;
}

cplx fn_source(const Medium& medium, double q0, double xi, int mp) {
  return source_from(Weight(medium, q0, xi, mp), xi);
}

FnSystem build_system(const Medium& medium, double q0, int l_max, int n_quad) {
  if (q0 < 0.0) throw ConfigError("fn3d: q0 must be >= 0");
  if (l_max < 0) throw ConfigError("fn3d: l_max must be >= 0");
  FnSystem s{medium, q0, l_max, unknown_list(l_max), {}, {}, {}, false};
  for (int mp = -l_max; mp <= l_max; ++mp) {
    bool over = false;
    for (double xi : collocation_values(medium, mp, l_max, &over))
      s.rows.push_back(FnRow{mp, xi, xi > 1.0});
    s.collocation_overflow = s.collocation_overflow || over;
  }
  const int n = static_cast<int>(s.unknowns.size());
  const int nr = static_cast<int>(s.rows.size());
  HemiRule rule(n_quad);
  const Eigen::Index nq = static_cast<Eigen::Index>(rule.size());
  // mu Y_lm w_k at the hemisphere nodes
  Eigen::MatrixXcd Y(nq, n);
  for (int c = 0; c < n; ++c)
    for (Eigen::Index k = 0; k < nq; ++k)
      Y(k, c) = rule.w[k] * rule.mu[k] * sph_harm(s.unknowns[c].first, s.unknowns[c].second, rule.mu[k], rule.phi[k]);
  s.A.resize(nr, n);
  s.K.resize(nr);
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < nr; ++r) {
    Weight w(medium, q0, s.rows[r].xi, s.rows[r].m);
    Eigen::VectorXcd wv(nq);
    for (Eigen::Index k = 0; k < nq; ++k) wv[k] = w(rule.mu[k], rule.phi[k]);
    Eigen::RowVectorXcd hemi = wv.transpose() * Y;
    for (int c = 0; c < n; ++c) {
      const auto [l, m] = s.unknowns[c];
      s.A(r, c) = -sign_pow(l) * (w.full(l, m) - hemi[c]);
    }
    s.K[r] = source_from(w, s.rows[r].xi);
  }
  return s;
}

FnSolution solve(const FnSystem& system) {
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(system.A);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-15))
    throw NumericError(fmt::format("fn3d: collocation matrix is singular (condition estimate {:.3e})", 1.0 / rcond));
  FnSolution sol;
  sol.unknowns = system.unknowns;
  sol.c_check = lu.solve(system.K);
  sol.condition = 1.0 / rcond;
  double big = 0.0, res = 0.0;
  for (std::size_t i = 0; i < sol.unknowns.size(); ++i) {
    const auto [l, m] = sol.unknowns[i];
    big = std::max(big, std::abs(sol.c_check[static_cast<Eigen::Index>(i)]));
    if (m > 0) res = std::max(res, std::abs(sol.at(l, -m) - sign_pow(m) * sol.at(l, m)));
  }
  sol.symmetry_residual = big > 0.0 ? res / big : 0.0;
  return sol;
}

double hemispheric_flux_weight(int l) {
  if (l % 2) throw ConfigError("fn3d: flux weight needs even l");
  const int h = l / 2;
  const double f = std::exp(log_factorial(l) - l * std::log(2.0) - 2.0 * log_factorial(h));
  return sign_pow(h + 1) * f / ((l - 1.0) * (l + 2.0));
}

cplx hemispheric_flux(const FnSolution& solution) {
  cplx j = 0.0;
  for (std::size_t i = 0; i < solution.unknowns.size(); ++i) {
    const auto [l, m] = solution.unknowns[i];
    if (m != 0 || (l % 2)) continue;
    j += std::sqrt(2.0 * l + 1.0) * hemispheric_flux_weight(l) * solution.c_check[static_cast<Eigen::Index>(i)];
  }
  return j / (4.0 * std::pow(kPi, 1.5));
}

}  // namespace rrf
