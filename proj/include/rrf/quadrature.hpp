#pragma once

#include <functional>
#include <vector>

namespace rrf {

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

// Gauss-Legendre on (0,1) with the mirrored copy implied: node(i) for
// i in [0, 2N) returns mu_i for i < N and -mu_{i-N} otherwise.
struct HalfRangeRule {
  int N = 0;
  std::vector<double> mu;  // ascending in (0,1)
  std::vector<double> w;

  double node(int i) const { return i < N ? mu[i] : -mu[i - N]; }
  double weight(int i) const { return i < N ? w[i] : w[i - N]; }
};

// Golub-Welsch, Newton-polished
Rule gauss_legendre(int n, double a = -1.0, double b = 1.0);
HalfRangeRule gauss_legendre_half(int N);

struct HankelResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
  int evaluations = 0;
};

struct HankelOptions {
  double rtol = 1e-8;
  double atol = 0.0;
  // decay scale of f; below r*q_scale < 1 the Bessel factor is treated as smooth
  double q_scale = 1.0;
  int max_levels = 9;
};

// int_0^inf q J_m(q r) f(q) dq
HankelResult hankel_integral(const std::function<double(double)>& f, int m, double r,
                             const HankelOptions& opt = {});

// int_a^b f by tanh-sinh
double integrate_finite(const std::function<double(double)>& f, double a, double b,
                        double rtol = 1e-10, double* error = nullptr);
// int_a^inf f by exp-sinh
double integrate_semi_infinite(const std::function<double(double)>& f, double a,
                               double rtol = 1e-10, double* error = nullptr);

}  // namespace rrf
