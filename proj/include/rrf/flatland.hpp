#pragma once

#include <vector>

#include "rrf/specfun.hpp"

namespace rrf {

// gamma_0..gamma_L at z
template <class T>
std::vector<T> gamma_polys(const Medium2D& medium, T z, int L) {
  if (L < 0) throw ConfigError("gamma_polys: L must be >= 0");
  std::vector<T> g(static_cast<std::size_t>(L) + 1);
  g[0] = T(1);
  if (L >= 1) g[1] = (1.0 - medium.albedo()) * z;
  for (int m = 1; m < L; ++m) g[m + 1] = 2.0 * z * medium.h(m) * g[m] - g[m - 1];
  return g;
}

struct Spectrum2D {
  std::vector<double> nu;  // descending, all > 1
  int count() const { return static_cast<int>(nu.size()); }
};

struct Norm2D {
  double nu = 0.0;
  double value = 0.0;
};

// g^(2D)(z, phi) = 1 + 2 sum_m beta_m gamma_m(z) cos(m phi)
cplx g2d(const Medium2D& medium, cplx z, cplx phi);
// g^(2D)(nu, phi_nu): cos(m phi_nu) = T_m(nu) on every branch
double g2d_on_shell(const Medium2D& medium, double nu);

cplx dispersion_2d(const Medium2D& medium, cplx z);
double dispersion_2d(const Medium2D& medium, double z);
// principal-value lambda^(2D) on (-1, 1)
double lambda_2d(const Medium2D& medium, double nu);

Spectrum2D eigenvalues_2d(const Medium2D& medium);

// phi_nu as a complex angle
cplx phi_nu(double nu);

Norm2D norm_2d(const Medium2D& medium, double nu);

// u^(2D) at mu_t distance x from a unit isotropic point source
double density_2d(const Medium2D& medium, const Spectrum2D& spec, double x);
double density_2d(const Medium2D& medium, double x);
// the integral over the continuum alone, in the same units
double density_2d_continuum(const Medium2D& medium, double x);

}  // namespace rrf
