#include "rrf/specfun.hpp"

#include <array>
#include <boost/math/special_functions/bessel.hpp>
#include <numbers>

namespace rrf {

namespace {

const std::array<double, 171>& factorial_table() {
  static const std::array<double, 171> table = [] {
    std::array<double, 171> t{};
    t[0] = 1.0;
    for (int k = 1; k <= 170; ++k) t[k] = t[k - 1] * k;
    return t;
  }();
  return table;
}

}  // namespace

double factorial(int n) {
  if (n < 0) return 0.0;
  if (n > 170) return HUGE_VAL;
  return factorial_table()[n];
}

double log_factorial(int n) { return std::lgamma(n + 1.0); }

double double_factorial_odd(int m) {
  double r = 1.0;
  for (int k = 2 * m - 1; k > 1; k -= 2) r *= k;
  return r;
}

double legendre_p(int l, int m, double mu) {
  if (m < 0 || m > l) throw ConfigError("legendre_p: need 0 <= m <= l");
  // P_m^m = (-1)^m (2m-1)!! (1-mu^2)^{m/2}
  double s = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  double pmm = 1.0;
  for (int k = 1; k <= m; ++k) pmm *= -(2.0 * k - 1.0) * s;
  if (l == m) return pmm;
  double pm1 = (2.0 * m + 1.0) * mu * pmm;
  if (l == m + 1) return pm1;
  double p0 = pmm, p1 = pm1;
  for (int k = m + 1; k < l; ++k) {
    double p2 = ((2.0 * k + 1.0) * mu * p1 - (k + m) * p0) / (k - m + 1.0);
    p0 = p1;
    p1 = p2;
  }
  return p1;
}

cplx sph_harm(int l, int m, double mu, double phi) {
  const int am = std::abs(m);
  if (am > l) return 0.0;
  double norm = std::sqrt((2.0 * l + 1.0) / (4.0 * std::numbers::pi) *
                          std::exp(log_factorial(l - am) - log_factorial(l + am)));
  cplx y = norm * legendre_p(l, am, mu) * std::polar(1.0, am * phi);
  if (m < 0) {
    y = std::conj(y);
    if (am % 2) y = -y;
  }
  return y;
}

double p_poly(int l, int m, double mu) {
  if (l < std::abs(m)) throw ConfigError("p_poly: need l >= |m|");
  return p_poly_all<double>(l, m, mu).back();
}

std::vector<WignerSlice> wigner_d_complex(int l_max, double nu_q) {
  const double x = std::abs(nu_q);
  const double cb = std::sqrt(1.0 + x * x);
  // half-angle factors, c real and s = sin(beta)/(2c) imaginary
  const double c = std::sqrt(0.5 * (1.0 + cb));
  const cplx s(0.0, x / (2.0 * c));

  std::vector<WignerSlice> out(static_cast<std::size_t>(l_max) + 1);
  for (int l = 0; l <= l_max; ++l) {
    out[l].l = l;
    out[l].nu_q = nu_q;
    out[l].d.assign(static_cast<std::size_t>((2 * l + 1) * (2 * l + 1)), 0.0);
  }

  auto seed = [&](int l, int mp, int m) {
    // single-term Wigner sum at the lowest admissible degree
    cplx sum = 0.0;
    int kmin = std::max(0, m - mp), kmax = std::min(l + m, l - mp);
    for (int k = kmin; k <= kmax; ++k) {
      double lg = 0.5 * (log_factorial(l + mp) + log_factorial(l - mp) + log_factorial(l + m) +
                         log_factorial(l - m)) -
                  log_factorial(l + m - k) - log_factorial(k) - log_factorial(l - k - mp) -
                  log_factorial(k - m + mp);
      double sign = ((k - m + mp) % 2 == 0) ? 1.0 : -1.0;
      sum += sign * std::exp(lg) * std::pow(cplx(c), 2 * l - 2 * k + m - mp) *
             std::pow(s, 2 * k - m + mp);
    }
    return sum;
  };

  for (int mp = -l_max; mp <= l_max; ++mp) {
    for (int m = -l_max; m <= l_max; ++m) {
      const int l0 = std::max(std::abs(m), std::abs(mp));
      cplx dm1 = 0.0;
      cplx d0 = seed(l0, mp, m);
      out[l0].at(mp, m) = d0;
      for (int j = l0; j < l_max; ++j) {
        double jp = j + 1.0;
        double den = std::sqrt((jp * jp - m * m) * (jp * jp - mp * mp));
        double mix = (j == 0) ? 0.0 : double(m) * mp / (j * jp);
        cplx d1 = jp * (2.0 * j + 1.0) / den * (cb - mix) * d0;
        if (j > l0) {
          double num = std::sqrt((double(j) * j - m * m) * (double(j) * j - mp * mp));
          d1 -= num / den * jp / j * dm1;
        }
        dm1 = d0;
        d0 = d1;
        out[j + 1].at(mp, m) = d1;
      }
    }
  }
  return out;
}

std::vector<double> wigner_d00(int l_max, double nu_q) {
  const double kz = std::sqrt(1.0 + nu_q * nu_q);
  std::vector<double> p(static_cast<std::size_t>(l_max) + 1);
  p[0] = 1.0;
  if (l_max >= 1) p[1] = kz;
  for (int l = 1; l < l_max; ++l) p[l + 1] = ((2.0 * l + 1.0) * kz * p[l] - l * p[l - 1]) / (l + 1.0);
  return p;
}

double clebsch_gordan(int l1, int m1, int l2, int m2, int l3, int m3) {
  if (m3 != m1 + m2) return 0.0;
  if (l1 < 0 || l2 < 0 || l3 < 0) return 0.0;
  if (std::abs(m1) > l1 || std::abs(m2) > l2 || std::abs(m3) > l3) return 0.0;
  if (l3 < std::abs(l1 - l2) || l3 > l1 + l2) return 0.0;
  // Racah formula
  double pre = 0.5 * (std::log(2.0 * l3 + 1.0) + log_factorial(l3 + l1 - l2) +
                      log_factorial(l3 - l1 + l2) + log_factorial(l1 + l2 - l3) -
                      log_factorial(l1 + l2 + l3 + 1) + log_factorial(l3 + m3) +
                      log_factorial(l3 - m3) + log_factorial(l1 - m1) + log_factorial(l1 + m1) +
                      log_factorial(l2 - m2) + log_factorial(l2 + m2));
  int kmin = std::max({0, l2 - l3 - m1, l1 - l3 + m2});
  int kmax = std::min({l1 + l2 - l3, l1 - m1, l2 + m2});
  double sum = 0.0;
  for (int k = kmin; k <= kmax; ++k) {
    double t = pre - log_factorial(k) - log_factorial(l1 + l2 - l3 - k) - log_factorial(l1 - m1 - k) -
               log_factorial(l2 + m2 - k) - log_factorial(l3 - l2 + m1 + k) -
               log_factorial(l3 - l1 - m2 + k);
    sum += ((k % 2) ? -1.0 : 1.0) * std::exp(t);
  }
  return sum;
}

double bessel_j(int m, double x) {
  if (x < 0.0) throw ConfigError("bessel_j: x must be >= 0");
  return boost::math::cyl_bessel_j(m, x);
}

double bessel_k0(double x) {
  if (!(x > 0.0)) throw ConfigError("bessel_k0: x must be > 0");
  return boost::math::cyl_bessel_k(0, x);
}

std::vector<double> mod_sph_k_all(int n, double x) {
  if (!(x > 0.0)) throw ConfigError("mod_sph_k: x must be > 0");
  std::vector<double> k(static_cast<std::size_t>(std::max(n, 1)) + 1);
  k[0] = std::exp(-x) / x;
  k[1] = k[0] * (1.0 + 1.0 / x);
  for (int j = 1; j < n; ++j) k[j + 1] = k[j - 1] + (2.0 * j + 1.0) / x * k[j];
  k.resize(static_cast<std::size_t>(n) + 1);
  return k;
}

double mod_sph_k(int n, double x) { return mod_sph_k_all(n, x).back(); }

double sph_bessel_j(int L, double x) {
  if (x < 0.0) throw ConfigError("sph_bessel_j: x must be >= 0");
  return boost::math::sph_bessel(L, x);
}

double bessel(BesselKind kind, int order, double x) {
  switch (kind) {
    case BesselKind::J: return bessel_j(order, x);
    case BesselKind::K0: return bessel_k0(x);
    case BesselKind::ModSphK: return mod_sph_k(order, x);
    case BesselKind::SphJ: return sph_bessel_j(order, x);
  }
  return 0.0;
}

}  // namespace rrf
