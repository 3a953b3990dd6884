#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include "rrf/medium.hpp"

namespace rrf {

using cplx = std::complex<double>;

// (2m-1)!! with (-1)!! = 1
double double_factorial_odd(int m);
double factorial(int n);
double log_factorial(int n);

// Associated Legendre P_l^m(mu), Condon-Shortley phase included, 0 <= m <= l
double legendre_p(int l, int m, double mu);

// Y_lm(mu, phi) with negative m via Y_{l,-m} = (-1)^m conj(Y_lm)
cplx sph_harm(int l, int m, double mu, double phi);

// Renormalized polynomials p_l^m for l = |m| .. L (index l - |m|).
// Recurrence sqrt((l+1)^2-m^2) p_{l+1} + sqrt(l^2-m^2) p_{l-1} = (2l+1) mu p_l.
template <class T>
std::vector<T> p_poly_all(int L, int m, T mu) {
  const int am = std::abs(m);
  std::vector<T> p;
  if (L < am) return p;
  p.resize(static_cast<std::size_t>(L - am) + 1);
  double seed = std::sqrt(factorial(2 * am)) / (std::ldexp(1.0, am) * factorial(am));
  if (m < 0 && (am % 2)) seed = -seed;
  p[0] = T(seed);
  for (int l = am; l < L; ++l) {
    double a1 = std::sqrt(double((l + 1) * (l + 1) - am * am));
    double a0 = std::sqrt(double(l * l - am * am));
    T prev = (l > am) ? p[l - am - 1] : T(0);
    p[l - am + 1] = ((2.0 * l + 1.0) * mu * p[l - am] - a0 * prev) / a1;
  }
  return p;
}

double p_poly(int l, int m, double mu);

// Normalized Chandrasekhar polynomials g_l^m(nu), stored as mantissa * 2^exponent.
template <class T>
struct ChandraTable {
  int m = 0;
  T nu{};
  int L = 0;
  std::vector<T> mant;  // index l - |m|
  std::vector<int> expo;

  T value(int l) const {
    const int i = l - std::abs(m);
    return mant[i] * std::ldexp(1.0, expo[i]);
  }
  // g_l / g_k without forming either value
  T ratio(int l, int k) const {
    const int i = l - std::abs(m), j = k - std::abs(m);
    return mant[i] / mant[j] * std::ldexp(1.0, expo[i] - expo[j]);
  }
  int lowest() const { return std::abs(m); }
};

template <class T>
ChandraTable<T> chandra_g(const Medium& medium, int m, T nu, int L) {
  const int am = std::abs(m);
  if (L < am) throw ConfigError("chandra_g: L must be >= |m|");
  if (nu == T(0)) throw ConfigError("chandra_g: nu must be nonzero");
  ChandraTable<T> t;
  t.m = m;
  t.nu = nu;
  t.L = L;
  const std::size_t n = static_cast<std::size_t>(L - am) + 1;
  t.mant.assign(n, T(0));
  t.expo.assign(n, 0);
  double seed = std::sqrt(factorial(2 * am)) / (std::ldexp(1.0, am) * factorial(am));
  if (m < 0 && (am % 2)) seed = -seed;
  // running pair (a = g_{l-1}, b = g_l) shares one exponent e
  T a(0), b(seed);
  int e = 0;
  t.mant[0] = b;
  for (int l = am; l < L; ++l) {
    double c1 = std::sqrt(double((l + 1) * (l + 1) - am * am));
    double c0 = std::sqrt(double(l * l - am * am));
    T next = (nu * medium.h(l) * b - c0 * a) / c1;
    a = b;
    b = next;
    double mag = std::max(std::abs(a), std::abs(b));
    if (mag > 0x1p200) {
      a = std::ldexp(1.0, -200) * a;
      b = std::ldexp(1.0, -200) * b;
      e += 200;
    } else if (mag < 0x1p-200 && mag > 0.0) {
      a = std::ldexp(1.0, 200) * a;
      b = std::ldexp(1.0, 200) * b;
      e -= 200;
    }
    t.mant[l - am + 1] = b;
    t.expo[l - am + 1] = e;
  }
  return t;
}

// Analytically continued Wigner d-matrix d^l_{m'm}(i tau) with cos = sqrt(1+x^2), sin = i x.
struct WignerSlice {
  int l = 0;
  double nu_q = 0.0;
  std::vector<cplx> d;  // row m'+l, column m+l
  cplx operator()(int mp, int m) const { return d[(mp + l) * (2 * l + 1) + (m + l)]; }
  cplx& at(int mp, int m) { return d[(mp + l) * (2 * l + 1) + (m + l)]; }
};

std::vector<WignerSlice> wigner_d_complex(int l_max, double nu_q);

// d^l_{00}(i tau) = P_l(k_z) for l = 0..l_max
std::vector<double> wigner_d00(int l_max, double nu_q);

double clebsch_gordan(int l1, int m1, int l2, int m2, int l3, int m3);

enum class BesselKind { J, K0, ModSphK, SphJ };

double bessel(BesselKind kind, int order, double x);
double bessel_j(int m, double x);
double bessel_k0(double x);
// k_n without the pi/2 factor: k_0(x) = exp(-x)/x
double mod_sph_k(int n, double x);
// k_0..k_n in one upward sweep
std::vector<double> mod_sph_k_all(int n, double x);
double sph_bessel_j(int L, double x);

}  // namespace rrf
