#pragma once

#include <utility>
#include <vector>

#include "rrf/specfun.hpp"

namespace rrf {

// Positive discrete eigenvalues nu_0 > nu_1 > ... > 1 of order m.
struct DiscreteSpectrum {
  int m = 0;
  std::vector<double> nu;
  int l_B = 0;
  int count() const { return static_cast<int>(nu.size()); }
};

struct NormFactor {
  int m = 0;
  double nu = 0.0;
  double value = 0.0;
};

// g^m(nu, mu) = sum_l beta_l p_l^m(mu) g_l^m(nu)
double g_nu_mu(const Medium& medium, int m, double nu, double mu);
cplx g_nu_mu(const Medium& medium, int m, cplx nu, cplx mu);

// Lambda^m(nu) off the cut [-1, 1]
cplx dispersion(const Medium& medium, int m, cplx nu);
double dispersion(const Medium& medium, int m, double nu);

// Eigenvalues of the symmetric tridiagonal A(m) above 1; l_B doubles until
// the retained values move less than 1e-10. l_B = 0 picks the starting order.
DiscreteSpectrum discrete_eigenvalues(const Medium& medium, int m, int l_B = 0);

// symmetric tridiagonal A(m) of order l_B - |m| + 1 as (diagonal, off-diagonal)
std::pair<std::vector<double>, std::vector<double>> a_matrix(const Medium& medium, int m, int l_B);

// principal-value lambda^m(nu) for nu in (-1, 1)
double lambda_continuum(const Medium& medium, int m, double nu);

// N^m(nu): discrete branch for |nu| > 1, continuum branch for 0 < |nu| < 1
NormFactor norm_factor(const Medium& medium, int m, double nu);

// c U at mu_t |z - z0| = dz for a unit isotropic point source on the axis
double energy_density_isotropic_source(const Medium& medium, double dz);
double energy_density_isotropic_source(const Medium& medium, const DiscreteSpectrum& spec0, double dz);

// lower and upper estimates of nu_0 from the diffusion-type bracket
std::pair<double, double> nu0_bracket(const Medium& medium);

}  // namespace rrf
