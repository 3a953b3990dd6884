#include "rrf/flatland.hpp"

#include <boost/math/tools/roots.hpp>
#include <numbers>

#include "rrf/quadrature.hpp"

namespace rrf {

namespace {

// sqrt(z^2 - 1) with the cut on [-1, 1] and ~z at infinity
cplx root_z(cplx z) { return std::sqrt(z - 1.0) * std::sqrt(z + 1.0); }

double chebyshev_t(int m, double x) {
  double a = 1.0, b = x;
  if (m == 0) return a;
  for (int k = 1; k < m; ++k) {
    double c = 2.0 * x * b - a;
    a = b;
    b = c;
  }
  return b;
}

// sin(m theta) / sin(theta) with cos(theta) = x
double chebyshev_u_shift(int m, double x) {
  if (m == 0) return 0.0;
  double a = 0.0, b = 1.0;
  for (int k = 1; k < m; ++k) {
    double c = 2.0 * x * b - a;
    a = b;
    b = c;
  }
  return b;
}

double dlambda_dz(const Medium2D& medium, double z) {
  auto D = [&](double h) { return (dispersion_2d(medium, z + h) - dispersion_2d(medium, z - h)) / (2.0 * h); };
  const double h = 1e-6 * std::abs(z);
  return (4.0 * D(h / 2.0) - D(h)) / 3.0;
}

}  // namespace

cplx g2d(const Medium2D& medium, cplx z, cplx phi) {
  const int L = medium.l_max();
  auto gam = gamma_polys<cplx>(medium, z, L);
  cplx s = 1.0;
  for (int m = 1; m <= L; ++m) s += 2.0 * medium.beta(m) * gam[m] * std::cos(double(m) * phi);
  return s;
}

double g2d_on_shell(const Medium2D& medium, double nu) {
  const int L = medium.l_max();
  auto gam = gamma_polys<double>(medium, nu, L);
  double s = 1.0;
  for (int m = 1; m <= L; ++m) s += 2.0 * medium.beta(m) * gam[m] * chebyshev_t(m, nu);
  return s;
}

cplx dispersion_2d(const Medium2D& medium, cplx z) {
  if (z.imag() == 0.0 && std::abs(z.real()) <= 1.0) throw ConfigError("dispersion_2d: z on the cut [-1, 1]");
  // (1/2pi) int cos(m phi) / (z - cos phi) dphi = xi^m / sqrt(z^2-1), |xi| < 1
  const int L = medium.l_max();
  const cplx s = root_z(z);
  const cplx xi = 1.0 / (z + s);  // = z - s without cancellation
  auto gam = gamma_polys<cplx>(medium, z, L);
  cplx sum = 1.0, xp = 1.0;
  for (int m = 1; m <= L; ++m) {
    xp *= xi;
    sum += 2.0 * medium.beta(m) * gam[m] * xp;
  }
  return 1.0 - medium.albedo() * z * sum / s;
}

double dispersion_2d(const Medium2D& medium, double z) { return dispersion_2d(medium, cplx(z, 0.0)).real(); }

double lambda_2d(const Medium2D& medium, double nu) {
  if (std::abs(nu) >= 1.0) throw ConfigError("lambda_2d: |nu| must be < 1");
  // principal value (1/2pi) PV int cos(m phi)/(nu - cos phi) dphi = -sin(m theta)/sin(theta)
  const int L = medium.l_max();
  auto gam = gamma_polys<double>(medium, nu, L);
  double sum = 0.0;
  for (int m = 1; m <= L; ++m) sum -= 2.0 * medium.beta(m) * gam[m] * chebyshev_u_shift(m, nu);
  return 1.0 - medium.albedo() * nu * sum;
}

cplx phi_nu(double nu) {
  if (std::abs(nu) <= 1.0) return std::acos(nu);
  if (nu > 1.0) return cplx(0.0, std::acosh(nu));
  return cplx(std::numbers::pi, std::acosh(-nu));
}

Spectrum2D eigenvalues_2d(const Medium2D& medium) {
  if (medium.albedo() >= 1.0) throw ConfigError("eigenvalues_2d: albedo must be < 1");
  // scan in s = arccosh(nu), logarithmically, then refine each sign change
  auto f = [&](double s) { return dispersion_2d(medium, std::cosh(s)); };
  constexpr int n = 4000;
  const double lo = std::log(1e-7), hi = std::log(25.0);
  Spectrum2D out;
  double s_prev = std::exp(lo), f_prev = f(s_prev);
  for (int i = 1; i <= n; ++i) {
    double s = std::exp(lo + (hi - lo) * i / n);
    double fs = f(s);
    if ((fs < 0.0) != (f_prev < 0.0)) {
      boost::uintmax_t iters = 200;
      auto r = boost::math::tools::toms748_solve(f, s_prev, s, f_prev, fs,
                                                 boost::math::tools::eps_tolerance<double>(52), iters);
      out.nu.push_back(std::cosh(0.5 * (r.first + r.second)));
    }
    s_prev = s;
    f_prev = fs;
  }
  std::sort(out.nu.begin(), out.nu.end(), std::greater<>());
  return out;
}

Norm2D norm_2d(const Medium2D& medium, double nu) {
  if (nu == 0.0) throw ConfigError("norm_2d: nu must be nonzero");
  if (std::abs(nu) == 1.0) throw ConfigError("norm_2d: nu = +-1 rejected");
  const double w = medium.albedo();
  const double g = g2d_on_shell(medium, nu);
  if (std::abs(nu) > 1.0) {
    // equals int phi^2 cos(phi) dphi for the regular eigenfunction
    return {nu, w * nu * nu / (2.0 * std::numbers::pi) * g * dlambda_dz(medium, nu)};
  }
  const double c = std::sqrt(1.0 - nu * nu);
  const double lam = lambda_2d(medium, nu);
  return {nu, nu / (2.0 * c) * ((1.0 - nu * nu) * lam * lam + w * w * nu * nu * g * g)};
}

double density_2d_continuum(const Medium2D& medium, double x) {
  if (!(x > 0.0)) throw ConfigError("density_2d: x must be > 0");
  auto f = [&](double nu) {
    if (nu <= 0.0 || nu >= 1.0) return 0.0;
    double k = bessel_k0(x / nu);
    if (k == 0.0) return 0.0;
    return k / (nu * norm_2d(medium, nu).value);
  };
  return medium.mu_t() / std::numbers::pi * integrate_finite(f, 0.0, 1.0, 1e-11);
}

double density_2d(const Medium2D& medium, const Spectrum2D& spec, double x) {
  if (!(x > 0.0)) throw ConfigError("density_2d: x must be > 0");
  double sum = 0.0;
  for (double nu : spec.nu) sum += bessel_k0(x / nu) / (nu * norm_2d(medium, nu).value);
  return medium.mu_t() / std::numbers::pi * sum + density_2d_continuum(medium, x);
}

double density_2d(const Medium2D& medium, double x) { return density_2d(medium, eigenvalues_2d(medium), x); }

}  // namespace rrf
