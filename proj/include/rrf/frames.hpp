#pragma once

#include <complex>
#include <vector>

#include "rrf/specfun.hpp"

namespace rrf {

// sqrt with arg in [0, pi): the cut runs along the positive real axis
cplx branch_sqrt(cplx z);

// Complex unit vector k(nu, q) = (-i nu q cos phi_q, -i nu q sin phi_q, k_z).
struct Frame {
  double nu = 1.0;
  double q = 0.0;      // in mu_t units
  double phi_q = 0.0;

  double tau_arg() const { return nu * q; }
  double kz() const { return std::sqrt(1.0 + nu * nu * q * q); }
  double phi_k() const;
};

Frame make_frame(double nu, double q, double phi_q = 0.0);

// Coefficients f_lm, l <= l_max, packed at l*l + l + m.
struct ShExpansion {
  int l_max = 0;
  std::vector<cplx> c;

  ShExpansion() = default;
  explicit ShExpansion(int lmax) : l_max(lmax), c(static_cast<std::size_t>((lmax + 1) * (lmax + 1)), 0.0) {}
  static int index(int l, int m) { return l * l + l + m; }
  cplx& at(int l, int m) { return c[index(l, m)]; }
  cplx operator()(int l, int m) const { return c[index(l, m)]; }
};

// (Rf)_{lm'} = sum_m f_lm e^{-i m' phi_k} d^l_{m'm}(i tau)
ShExpansion rotate(const Frame& frame, const ShExpansion& f);
// (R^{-1} f)_{lm'} = sum_m f_lm e^{i m phi_k} d^l_{m m'}(i tau)
ShExpansion inverse_rotate(const Frame& frame, const ShExpansion& f);

// R mu = k_z mu - i nu q sqrt(1-mu^2) cos(phi - phi_q)
cplx rotated_mu(const Frame& frame, double mu, double phi);
// R^{-1} mu = k_z mu - i |nu q| sqrt(1-mu^2) cos(phi)
cplx inverse_rotated_mu(const Frame& frame, double mu, double phi);

cplx evaluate(const ShExpansion& f, double mu, double phi);

// pointwise product expanded through Clebsch-Gordan coefficients
ShExpansion sh_product(const ShExpansion& a, const ShExpansion& b);

}  // namespace rrf
