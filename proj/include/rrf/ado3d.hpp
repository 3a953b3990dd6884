#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "rrf/frames.hpp"
#include "rrf/quadrature.hpp"
#include "rrf/specfun.hpp"

namespace rrf {

namespace detail {
struct BeamTable;
}

// One eigenmode of order m. phi holds the 2N ordinate values phi^m(xi, mu_i)
// in HalfRangeRule::node order; g holds the moments g_l^m(xi), l = |m|..l_max.
struct AdoMode {
  double xi = 0.0;
  std::vector<double> phi;
  std::vector<double> g;
  // sum_i w_i mu_i phi_i^2 (1-mu_i^2)^|m| over all 2N nodes
  double n0 = 0.0;
};

struct AdoBlock {
  int m = 0;
  std::vector<AdoMode> modes;  // xi descending
};

struct AdoSpectrum {
  HalfRangeRule rule;
  int l_max = 0;
  double albedo = 0.0;
  std::vector<double> beta;
  std::vector<AdoBlock> blocks;  // m = 0..l_max; negative orders reuse |m|
  std::shared_ptr<const detail::BeamTable> beam;

  const AdoBlock& block(int m) const;
  const AdoMode& mode(int m, int n) const;
  double xi(int m, int n) const { return mode(m, n).xi; }
  // N(xi, q) = 2 pi k_z(xi q) sum_i w_i mu_i |Phi(s_i)|^2
  double normalization(int m, int n, double q) const;
};

AdoSpectrum build_spectrum(const Medium& medium, int N);

// unrotated Phi^m_{sign*xi_n}(mu, phi) from the closed form in the moments g_l^m
cplx eigenfunction(const AdoSpectrum& spec, int m, int n, double mu, double phi, int sign = 1);

// R_k(sign*xi_n, q) Phi^m_{sign*xi_n}(mu, phi)
cplx rotated_eigenfunction(const AdoSpectrum& spec, int m, int n, double q, double phi_q, double mu,
                           double phi, int sign = 1);

// R_k Phi for one mode with the rotated moment expansion precomputed
struct RotatedMode {
  Frame frame;
  ShExpansion coeffs;
  double prefactor = 0.0;  // (-1)^m albedo * (sign xi)
  cplx operator()(double mu, double phi) const;
};

RotatedMode rotate_mode(const AdoSpectrum& spec, int m, int n, double q, double phi_q, int sign = 1);

// sum_i w_i mu_i int_0^{2pi} a b dphi, trapezoid with K azimuths
cplx dom_mu_product(const AdoSpectrum& spec, const RotatedMode& a, const RotatedMode& b, int K = 64);

// all pairwise dom_mu_product values, each mode tabulated once
Eigen::MatrixXcd dom_mu_gram(const AdoSpectrum& spec, const std::vector<RotatedMode>& modes, int K = 64);

// mu_t k_z(xi q)/xi in mu_t units: z-decay rate of the mode
double decay_rate(double xi, double q);

// (e^{-tau/s} - e^{-tau/eta}) / (s - eta)
double c_function(double tau, double s, double eta);

// Fourier-space scattered intensity of a unit pencil beam along z at the origin.
// q, z in mu_t units; the result is scaled by 1/mu_t^2 (mu_s mu_t^2 -> albedo).
cplx scattered_intensity_fourier(const AdoSpectrum& spec, double q, double phi_q, double z, double mu,
                                 double phi);

// F(q, z) of the m = 0 block, dimensionless; evaluated in extended precision
double beam_kernel(const AdoSpectrum& spec, double q, double z);

// c U(rho, z) of the scattered light, physical units of the medium
double energy_density_beam(const AdoSpectrum& spec, const Medium& medium, double rho, double z);

}  // namespace rrf
