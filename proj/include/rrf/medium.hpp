#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rrf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optical medium. beta holds the (2l+1)-weighted Legendre moments of the
// phase function, beta[0] == 1.
class Medium {
 public:
  Medium(double mu_a, double mu_s, std::vector<double> beta);

  double mu_a() const { return mu_a_; }
  double mu_s() const { return mu_s_; }
  double mu_t() const { return mu_a_ + mu_s_; }
  double albedo() const { return mu_s_ / (mu_a_ + mu_s_); }
  int l_max() const { return static_cast<int>(beta_.size()) - 1; }
  const std::vector<double>& beta() const { return beta_; }
  double beta(int l) const { return (l >= 0 && l <= l_max()) ? beta_[l] : 0.0; }
  double g() const { return beta(1) / 3.0; }

  // h_l = 2l+1 - albedo*beta_l, beta_l = 0 beyond l_max
  double h(int l) const { return 2.0 * l + 1.0 - albedo() * beta(l); }

  // same optical coefficients, beta truncated (or zero padded) to degree l
  Medium truncated(int l) const;

  std::string describe() const;

 private:
  double mu_a_;
  double mu_s_;
  std::vector<double> beta_;
};

class Medium2D {
 public:
  Medium2D(double mu_a, double mu_s, std::vector<double> beta2d);

  double mu_a() const { return mu_a_; }
  double mu_s() const { return mu_s_; }
  double mu_t() const { return mu_a_ + mu_s_; }
  double albedo() const { return mu_s_ / (mu_a_ + mu_s_); }
  int l_max() const { return static_cast<int>(beta_.size()) - 1; }
  const std::vector<double>& beta() const { return beta_; }
  double beta(int m) const { return (m >= 0 && m <= l_max()) ? beta_[m] : 0.0; }
  double h(int m) const { return 1.0 - albedo() * beta(m); }
  std::string describe() const;

 private:
  double mu_a_;
  double mu_s_;
  std::vector<double> beta_;
};

std::vector<double> henyey_greenstein(double g, int l_max);

// (1/4pi) sum_l beta_l P_l(c)
double phase_eval(const Medium& medium, double cosangle);

// closed-form HG density, normalized on the sphere
double hg_phase(double g, double cosangle);

// true when the truncated expansion is nonnegative on a dense cosine grid
bool phase_nonnegative(const Medium& medium, int samples = 2001);

// Key/value file: mu_a, mu_s and either (g, l_max) or beta = b0, b1, ...
Medium load_medium(const std::string& path);
Medium medium_from_keys(double mu_a, double mu_s, const std::string& beta_list, double g, int l_max);

}  // namespace rrf
