#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "rrf/flatland.hpp"

using namespace rrf;

namespace {

constexpr double kPi = std::numbers::pi;

Medium2D iso2(double w) { return Medium2D(1.0 - w, w, {1.0}); }

// periodic trapezoid over [0, 2pi)
template <class F>
auto trapezoid(F&& f, int n) {
  decltype(f(0.0)) s{};
  for (int i = 0; i < n; ++i) s += f(2.0 * kPi * i / n);
  return s * (2.0 * kPi / n);
}

cplx dispersion_by_quadrature(const Medium2D& m, cplx z) {
  auto I = trapezoid([&](double ph) { return g2d(m, z, ph) / (z - std::cos(ph)); }, 4096);
  return 1.0 - m.albedo() * z / (2.0 * kPi) * I;
}

// isotropic density as a sum over collision orders: in Fourier space the
// uncollided kernel is 2pi/sqrt(1+k^2), and each order adds a factor w/sqrt(1+k^2).
// Order n contributes w^n a_v(x), a_v = x^v K_v(x) / (2^v Gamma(v+1)), v = (n-1)/2,
// with a_{v+1} = a_{v-1} x^2/(4v(v+1)) + a_v v/(v+1) along each parity chain.
double neumann_density(double w, double x) {
  auto a_direct = [x](double v) {
    return std::pow(x, v) * boost::math::cyl_bessel_k(v, x) / (std::pow(2.0, v) * boost::math::tgamma(v + 1.0));
  };
  double chain[2][2] = {{a_direct(-0.5), a_direct(0.5)}, {a_direct(0.0), a_direct(1.0)}};
  double vlast[2] = {0.5, 1.0};
  double sum = 0.0;
  for (int n = 0; n < 4000; ++n) {
    const int c = (n % 2 == 0) ? 0 : 1;
    const int k = n / 2;  // position along the chain
    double term;
    if (k < 2) {
      term = chain[c][k];
    } else {
      double v = vlast[c];
      double next = chain[c][0] * x * x / (4.0 * v * (v + 1.0)) + chain[c][1] * v / (v + 1.0);
      chain[c][0] = chain[c][1];
      chain[c][1] = next;
      vlast[c] = v + 1.0;
      term = next;
    }
    double t = std::pow(w, n) * term;
    sum += t;
    if (n > 20 && t < 1e-17 * sum) break;
  }
  return sum;
}

}  // namespace

TEST_SUITE("flatland") {

TEST_CASE("gamma polynomials") {
  Medium2D m = iso2(0.7);
  auto g = gamma_polys<double>(m, 1.8, 4);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == doctest::Approx(0.3 * 1.8).epsilon(1e-15));
  CHECK(g[2] == doctest::Approx(2.0 * 0.3 * 1.8 * 1.8 - 1.0).epsilon(1e-15));
  Medium2D a(0.1, 0.9, {1.0, 0.5});
  auto ga = gamma_polys<double>(a, 2.0, 2);
  CHECK(ga[2] == doctest::Approx(2.0 * 2.0 * (1.0 - 0.45) * ga[1] - 1.0).epsilon(1e-15));
  CHECK_THROWS_AS(gamma_polys<double>(m, 1.0, -1), ConfigError);
}

TEST_CASE("g2d is one for isotropic media") {
  for (double z : {0.3, 1.5, 7.0})
    for (double ph : {0.0, 1.0, 2.5}) CHECK(std::abs(g2d(iso2(0.8), z, ph) - 1.0) < 1e-15);
}

TEST_CASE("dispersion_2d closed-form kernel against quadrature") {
  Medium2D a(0.1, 0.9, {1.0, 0.5, 0.2, 0.05});
  for (cplx z : {cplx(1.05, 0.0), cplx(2.5, 0.0), cplx(-3.0, 0.0), cplx(0.4, 0.3), cplx(1.3, -0.8)})
    CHECK(std::abs(dispersion_2d(a, z) - dispersion_by_quadrature(a, z)) < 1e-11);
  CHECK(dispersion_2d(iso2(0.6), 2.0) == doctest::Approx(1.0 - 0.6 * 2.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK_THROWS_AS(dispersion_2d(a, 0.5), ConfigError);
}

TEST_CASE("lambda_2d as the boundary value from either side") {
  CHECK(lambda_2d(iso2(0.9), 0.3) == doctest::Approx(1.0).epsilon(1e-15));
  Medium2D a(0.1, 0.9, {1.0, 0.5, 0.2});
  for (double nu : {-0.6, 0.2, 0.75}) {
    // Re Lambda(nu + i eps) = lambda + O(eps); one Richardson step
    const double eps = 1e-4;
    auto I = [&](double e) {
      cplx z(nu, e);
      const int n = 1 << 21;
      cplx s = trapezoid([&](double ph) { return g2d(a, z, ph) / (z - std::cos(ph)); }, n);
      return (1.0 - a.albedo() * z / (2.0 * kPi) * s).real();
    };
    CHECK(lambda_2d(a, nu) == doctest::Approx(2.0 * I(eps / 2.0) - I(eps)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(lambda_2d(a, 1.0), ConfigError);
}

TEST_CASE("isotropic eigenvalue closed form") {
  for (double w : {0.2, 0.5, 0.8, 0.95}) {
    auto s = eigenvalues_2d(iso2(w));
    REQUIRE(s.count() == 1);
    CHECK(std::abs(s.nu[0] - 1.0 / std::sqrt(1.0 - w * w)) < 1e-12);
  }
  CHECK(std::abs(eigenvalues_2d(iso2(0.8)).nu[0] - 5.0 / 3.0) < 1e-12);
  CHECK(std::abs(eigenvalues_2d(iso2(0.6)).nu[0] - 1.25) < 1e-12);
}

TEST_CASE("anisotropic eigenvalue") {
  Medium2D a(0.1, 0.9, {1.0, 0.5});
  auto s = eigenvalues_2d(a);
  REQUIRE(s.count() >= 1);
  for (double nu : s.nu) {
    CHECK(nu > 1.0);
    CHECK(std::abs(dispersion_2d(a, nu)) < 1e-10);
  }
  CHECK(s.nu[0] > eigenvalues_2d(iso2(0.9)).nu[0]);
  CHECK_THROWS_AS(eigenvalues_2d(Medium2D(0.0, 1.0, {1.0})), ConfigError);
}

TEST_CASE("phi_nu branches") {
  CHECK(std::abs(phi_nu(1.0)) < 1e-15);
  for (double nu : {-0.7, 0.0, 0.4}) CHECK(std::cos(phi_nu(nu)).real() == doctest::Approx(nu).epsilon(1e-15));
  for (double nu : {1.5, -2.5}) {
    CHECK(std::abs(std::cos(phi_nu(nu)) - nu) < 1e-14);
    CHECK(std::cos(2.0 * phi_nu(nu)).real() == doctest::Approx(2.0 * nu * nu - 1.0).epsilon(1e-14));
  }
}

TEST_CASE("discrete normalization equals the cosine-weighted square integral") {
  for (auto m : {iso2(0.8), Medium2D(0.1, 0.9, {1.0, 0.5}), Medium2D(0.05, 0.95, {1.0, 0.6, 0.3})}) {
    auto s = eigenvalues_2d(m);
    for (double nu : s.nu) {
      double direct = trapezoid([&](double ph) {
        double f = m.albedo() * nu / (2.0 * kPi) * g2d(m, nu, ph).real() / (nu - std::cos(ph));
        return f * f * std::cos(ph);
      }, 8192);
      double N = norm_2d(m, nu).value;
      CHECK(N > 0.0);
      CHECK(N == doctest::Approx(direct).epsilon(1e-7));
    }
  }
  CHECK_THROWS_AS(norm_2d(iso2(0.8), 1.0), ConfigError);
  CHECK_THROWS_AS(norm_2d(iso2(0.8), 0.0), ConfigError);
}

TEST_CASE("continuum normalization and the ballistic limit") {
  // without scattering the continuum alone carries exp(-x)/x
  Medium2D thin(1.0, 1e-14, {1.0});
  for (double x : {0.3, 1.0, 4.0})
    CHECK(density_2d_continuum(thin, x) == doctest::Approx(std::exp(-x) / x).epsilon(1e-8));
  Medium2D a(0.1, 0.9, {1.0, 0.5});
  for (double nu : {-0.5, 0.1, 0.9}) {
    auto n = norm_2d(a, nu).value;
    CHECK((n > 0.0) == (nu > 0.0));
  }
}

TEST_CASE("isotropic density against the collision-order series") {
  for (double w : {0.5, 0.9}) {
    Medium2D m = iso2(w);
    auto spec = eigenvalues_2d(m);
    for (double x : {0.5, 1.0, 2.0, 5.0})
      CHECK(density_2d(m, spec, x) == doctest::Approx(neumann_density(w, x)).epsilon(1e-7));
  }
  // medium units
  Medium2D m2(0.2, 1.8, {1.0});
  CHECK(density_2d(m2, 1.0) == doctest::Approx(2.0 * density_2d(iso2(0.9), 1.0)).epsilon(1e-12));
  CHECK_THROWS_AS(density_2d(iso2(0.9), 0.0), ConfigError);
}

TEST_CASE("density log-slope and continuum positivity") {
  for (auto m : {iso2(0.9), Medium2D(0.1, 0.9, {1.0, 0.5})}) {
    auto spec = eigenvalues_2d(m);
    for (double x : {0.5, 2.0, 8.0}) CHECK(density_2d_continuum(m, x) > 0.0);
    const double x = 80.0, h = 0.01;
    double slope = (std::log(density_2d(m, spec, x + h)) - std::log(density_2d(m, spec, x - h))) / (2.0 * h);
    // K0 asymptotics add -1/(2x)
    CHECK(slope == doctest::Approx(-1.0 / spec.nu[0] - 0.5 / x).epsilon(2e-3));
  }
}

}
