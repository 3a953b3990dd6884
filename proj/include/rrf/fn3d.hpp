#pragma once

#include <Eigen/Dense>
#include <vector>

#include "rrf/frames.hpp"
#include "rrf/medium.hpp"
#include "rrf/specfun.hpp"

namespace rrf {

// Half space z > 0 lit by the normally incident beam e^{-i q0 x} delta(s - z).
// The exit intensity is expanded as I(0, -s) = sum c_lm Y_lm(s) on the upper
// hemisphere with l = |m|, |m|+2, ...; the reported coefficients are
// c_check = 4 pi^2 c. Lengths in mu_t units.

struct FnRow {
  int m = 0;          // order of the weight function
  double xi = 0.0;    // collocation value
  bool discrete = false;
};

struct FnSystem {
  Medium medium;
  double q0 = 0.0;
  int l_max = 0;
  std::vector<std::pair<int, int>> unknowns;  // (l, m)
  std::vector<FnRow> rows;
  Eigen::MatrixXcd A;
  Eigen::VectorXcd K;
  bool collocation_overflow = false;

  int column(int l, int m) const;
};

struct FnSolution {
  std::vector<std::pair<int, int>> unknowns;
  Eigen::VectorXcd c_check;
  double condition = 0.0;
  double symmetry_residual = 0.0;  // max |c_{l,-m} - (-1)^m c_lm| / max |c|

  cplx at(int l, int m) const;
};

// unknowns with m >= 0
int fn_unknown_count(int l_max);

// per order m: discrete eigenvalues first, then cosine-spaced values
std::vector<double> collocation_values(const Medium& medium, int m, int l_max, bool* overflow = nullptr);

// int Y_lm^* Phi^m_nu ds over the sphere, valid for any eigenvalue nu
cplx eigen_moment(const Medium& medium, int l, int m, double nu);
// the same for l = |m| .. L
std::vector<cplx> eigen_moments(const Medium& medium, int m, double nu, int L);

// pieces of one matrix entry: A = -(-1)^l (full - hemi), where
// full = int_{S^2} mu Y_lm w ds, hemi = int_{S^2_+} mu Y_lm w ds and
// w = R_{k(-xi, q0)} Phi^{m'}_{-xi}
struct FnEntry {
  cplx full;
  cplx hemi;
  cplx value;
};
FnEntry fn_entry(const Medium& medium, double q0, double xi, int mp, int l, int m, int n_quad = 64);

// right side for one row, already scaled by 4 pi^2
cplx fn_source(const Medium& medium, double q0, double xi, int mp);

FnSystem build_system(const Medium& medium, double q0, int l_max, int n_quad = 64);
FnSolution solve(const FnSystem& system);

// int_0^1 mu P_l(mu) dmu
double hemispheric_flux_weight(int l);
// J_+ without the e^{-i q0 x} carrier
cplx hemispheric_flux(const FnSolution& solution);

}  // namespace rrf
