#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "rrf/frames.hpp"
#include "rrf/specfun.hpp"

namespace rrf {

namespace detail {
struct SlabSubspace;
}

using Vec3 = std::array<double, 3>;

// Positive eigenvalues of B(M) in mu_t units with their eigenvectors.
struct MrrfBlock {
  int M = 0;
  std::vector<double> lambda;             // descending
  std::vector<std::vector<double>> psi;   // psi[n][l - M], unit norm, psi_M > 0
  int zero_modes = 0;                     // lambda = 0 of odd-sized blocks
};

struct ModeBasis {
  double mu_t = 1.0;
  double albedo = 0.0;
  int l_max = 0;
  std::vector<double> sigma;  // sigma_l / mu_t = h_l / (2l+1)
  std::vector<MrrfBlock> blocks;

  const MrrfBlock& block(int M) const { return blocks.at(static_cast<std::size_t>(std::abs(M))); }
  // psi_l^M(sign*lambda_n); the negative partner is psi_l(-lambda) = (-1)^{l-M} psi_l(lambda)
  double psi(int M, int n, int l, int sign = 1) const;
  int mode_count() const;  // positive modes over M = -l_max..l_max
};

ModeBasis build_modes(const Medium& medium, int l_max);

// B(M) = A(M)/mu_t as (diagonal, off-diagonal), entries in units of 1/mu_t
std::pair<std::vector<double>, std::vector<double>> b_matrix(const Medium& medium, int M, int l_max);

// c^M_{lM}(lambda) = (-1)^M sqrt((2l+1) pi) g_l^M(lambda)
double coefficient_link(const Medium& medium, int M, double lambda, int l);

// chi^{lm}_{l'm'}(R z_hat), R physical; zero unless m == m'
double chi_infinite(const ModeBasis& basis, double R, int l, int m, int lp, int mp);
// ballistic part for s0 = z_hat
double chi_ballistic(const ModeBasis& basis, double R, int l, int m, int lp, int mp);

// G(r, s; 0, s0) in physical units; the rotation to R_hat = z_hat is done internally
double greens_point(const ModeBasis& basis, const Vec3& r, const Vec3& s, const Vec3& s0 = {0.0, 0.0, 1.0},
                    bool subtract_ballistic = false);

// c U = int G ds for a unit pencil beam along z at the origin, physical units
double energy_density_infinite(const ModeBasis& basis, double rho, double z, bool subtract_ballistic = true);

// modes in the harmonic basis: R_k sum_l psi_l/sqrt(sigma_l) Y_lM, k = k(sign*lambda, q)
ShExpansion mode_vector(const ModeBasis& basis, int M, int n, int sign, double q, double phi_q = 0.0);

// half-range overlaps int_{mu>0} Y*_{lm} Y_{l'm} ds
double half_range_overlap(int l, int lp, int m);

struct SlabProblem {
  double width = 1.0;  // mu_t L
  int l_max = 1;       // must match the mode basis
};

enum class SlabMethod { modes, subspace };

struct SlabSolution {
  double q = 0.0;
  SlabMethod method = SlabMethod::modes;
  std::vector<cplx> f_plus;   // decaying from z = 0, one per (M, lambda > 0)
  std::vector<cplx> f_minus;  // decaying from z = L, scaled by e^{-k_z L / lambda}
  std::vector<std::pair<int, int>> labels;  // (M, n)
  double condition = 0.0;
  int rows = 0;
  std::shared_ptr<const detail::SlabSubspace> subspace;  // set when method == subspace
};

// pencil beam along z through rho = 0 at z = 0; q in mu_t units
SlabSolution solve_slab(const ModeBasis& basis, const SlabProblem& problem, double q);

// Same boundary problem posed on ordered Schur bases of the decaying and growing
// subspaces; stays well conditioned where the rotated modes become collinear
SlabSolution solve_slab_subspace(const ModeBasis& basis, const SlabProblem& problem, double q);

// harmonic matrices of mu and sin(theta) cos(phi), (l'm', lm) = int Y*_{l'm'} f Y_lm ds
Eigen::MatrixXd mu_matrix(int l_max);
Eigen::MatrixXd sx_matrix(int l_max);

// condition above which SlabSolver switches to the subspace solve
inline constexpr double slab_mode_condition_limit = 1e4;

// harmonic coefficients of the Fourier-space intensity at depth mu_t z
ShExpansion slab_fourier_intensity(const ModeBasis& basis, const SlabProblem& problem, const SlabSolution& sol,
                                   double z);

// Per-q slab solutions shared across (rho, z) evaluations
class SlabSolver {
 public:
  SlabSolver(const Medium& medium, SlabProblem problem);
  const ModeBasis& basis() const { return basis_; }
  const SlabProblem& problem() const { return problem_; }
  std::shared_ptr<const SlabSolution> at(double q) const;
  // Fourier energy density sqrt(4 pi) c_00(q, z), dimensionless
  double fourier_density(double q, double z) const;
  // c U(rho, z) in physical units for a unit-power beam, 0 <= z <= L
  double energy_density(double rho, double z) const;
  std::size_t cached() const;
  double worst_condition() const;

 private:
  ModeBasis basis_;
  SlabProblem problem_;
  mutable std::mutex mutex_;
  mutable std::map<double, std::shared_ptr<const SlabSolution>> cache_;
  mutable double mode_q_limit_ = INFINITY;  // smallest q where the rotated modes were rejected
};

// slab_energy_density for one point; builds its own solver
double slab_energy_density(const Medium& medium, const SlabProblem& problem, double rho, double z);

// Hemispheric exit flux of a half-space lit by e^{-i q0 x} delta(s - z_hat), q0 in mu_t units
double half_space_flux(const ModeBasis& basis, double q0);
double half_space_flux_subspace(const ModeBasis& basis, double q0);

}  // namespace rrf
