#include "rrf/quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "rrf/medium.hpp"
#include "rrf/specfun.hpp"

namespace rrf {

namespace {

constexpr double kPi = std::numbers::pi;

// P_n and P_n' at x
void legendre_pair(int n, double x, double& p, double& dp) {
  double p0 = 1.0, p1 = x;
  if (n == 0) {
    p = 1.0;
    dp = 0.0;
    return;
  }
  for (int k = 1; k < n; ++k) {
    double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
    p0 = p1;
    p1 = p2;
  }
  p = p1;
  dp = n * (x * p1 - p0) / (x * x - 1.0);
}

struct OgataTable {
  std::vector<double> xi;  // j_{m,k} / pi
  std::vector<double> w;   // Y_m(j) / J_{m+1}(j)
};

class OgataCache {
 public:
  // first `count` nodes for order m; the returned reference stays valid
  const OgataTable& get(int m, std::size_t count) {
    std::lock_guard<std::mutex> lock(mu_);
    OgataTable& t = tables_[m];
    if (t.xi.size() < count) {
      std::size_t have = t.xi.size();
      std::size_t want = std::max(count, 2 * have);
      std::vector<double> zeros;
      boost::math::cyl_bessel_j_zero(double(m), int(have) + 1, unsigned(want - have),
                                     std::back_inserter(zeros));
      for (double j : zeros) {
        t.xi.push_back(j / kPi);
        t.w.push_back(boost::math::cyl_neumann(m, j) / boost::math::cyl_bessel_j(m + 1, j));
      }
    }
    return t;
  }

 private:
  std::mutex mu_;
  std::map<int, OgataTable> tables_;
};

OgataCache& ogata_cache() {
  static OgataCache cache;
  return cache;
}

// One Ogata sum with step h for int_0^inf F(x) J_m(x) dx.
double ogata_level(const std::function<double(double)>& F, int m, double h, int& evals) {
  const double tmax = 6.0;
  const std::size_t kmax = static_cast<std::size_t>(tmax / h) + 4;
  std::vector<double> xi, w;
  {
    const OgataTable& t = ogata_cache().get(m, kmax);
    xi.assign(t.xi.begin(), t.xi.begin() + kmax);
    w.assign(t.w.begin(), t.w.begin() + kmax);
  }
  double sum = 0.0;
  int small = 0;
  for (std::size_t k = 0; k < kmax; ++k) {
    const double t = h * xi[k];
    double psi, dpsi;
    const double ps = kPi * std::sinh(t);
    if (ps > 700.0) {
      psi = t;
      dpsi = 1.0;
    } else {
      psi = t * std::tanh(0.5 * ps);
      dpsi = (kPi * t * std::cosh(t) + std::sinh(ps)) / (1.0 + std::cosh(ps));
    }
    const double x = kPi * psi / h;
    const double term = kPi * w[k] * F(x) * boost::math::cyl_bessel_j(m, x) * dpsi;
    ++evals;
    sum += term;
    if (t > 1.0 && std::abs(term) <= 1e-17 * std::abs(sum)) {
      if (++small >= 5) break;
    } else {
      small = 0;
    }
  }
  return sum;
}

}  // namespace

Rule gauss_legendre(int n, double a, double b) {
  if (n < 1) throw ConfigError("gauss_legendre: n must be >= 1");
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = es.eigenvalues()[i];
    double wgw = 2.0 * es.eigenvectors()(0, i) * es.eigenvectors()(0, i);
    // Newton polish; weight from the derivative formula once polished
    double p, dp;
    for (int it = 0; it < 3; ++it) {
      legendre_pair(n, x, p, dp);
      if (dp == 0.0) break;
      x -= p / dp;
    }
    legendre_pair(n, x, p, dp);
    double wx = (dp != 0.0) ? 2.0 / ((1.0 - x * x) * dp * dp) : wgw;
    r.x[i] = 0.5 * (b - a) * x + 0.5 * (a + b);
    r.w[i] = 0.5 * (b - a) * wx;
  }
  return r;
}

HalfRangeRule gauss_legendre_half(int N) {
  if (N < 1) throw ConfigError("gauss_legendre_half: N must be >= 1");
  Rule r = gauss_legendre(N, 0.0, 1.0);
  HalfRangeRule h;
  h.N = N;
  h.mu = r.x;
  h.w = r.w;
  return h;
}

double integrate_finite(const std::function<double(double)>& f, double a, double b, double rtol,
                        double* error) {
  static thread_local boost::math::quadrature::tanh_sinh<double> ts;
  double err = 0.0, l1 = 0.0;
  double v = ts.integrate(f, a, b, rtol, &err, &l1);
  if (error) *error = err;
  return v;
}

double integrate_semi_infinite(const std::function<double(double)>& f, double a, double rtol,
                               double* error) {
  static thread_local boost::math::quadrature::exp_sinh<double> es;
  double err = 0.0, l1 = 0.0;
  double v = es.integrate([&](double t) { return f(a + t); }, rtol, &err, &l1);
  if (error) *error = err;
  return v;
}

HankelResult hankel_integral(const std::function<double(double)>& f, int m, double r,
                             const HankelOptions& opt) {
  if (r < 0.0) throw ConfigError("hankel_integral: r must be >= 0");
  HankelResult res;
  if (r == 0.0 && m != 0) {
    res.converged = true;
    return res;
  }
  if (r * opt.q_scale < 1.0) {
    int evals = 0;
    auto g = [&](double q) {
      ++evals;
      double j = (r == 0.0) ? 1.0 : boost::math::cyl_bessel_j(m, q * r);
      return q * j * f(q);
    };
    double err = 0.0;
    res.value = integrate_semi_infinite(g, 0.0, opt.rtol, &err);
    res.error = err;
    res.evaluations = evals;
    res.converged = err <= std::max(opt.rtol * std::abs(res.value), opt.atol) * 10.0;
    return res;
  }
  // x = q r: int q J_m(qr) f(q) dq = r^-2 int x f(x/r) J_m(x) dx
  auto F = [&](double x) { return x * f(x / r) / (r * r); };
  int evals = 0;
  double h = 0.1;
  double prev = ogata_level(F, m, h, evals);
  for (int level = 1; level <= opt.max_levels; ++level) {
    h *= 0.5;
    double cur = ogata_level(F, m, h, evals);
    res.value = cur;
    res.error = std::abs(cur - prev);
    res.evaluations = evals;
    if (res.error <= std::max(opt.rtol * std::abs(cur), opt.atol)) {
      res.converged = true;
      return res;
    }
    prev = cur;
  }
  return res;
}

}  // namespace rrf
