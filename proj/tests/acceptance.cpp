#include <fmt/format.h>

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "rrf/ado3d.hpp"
#include "rrf/caseology.hpp"
#include "rrf/flatland.hpp"
#include "rrf/fn3d.hpp"
#include "rrf/frames.hpp"
#include "rrf/mc_oracle.hpp"
#include "rrf/mrrf.hpp"
#include "rrf/quadrature.hpp"

using namespace rrf;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::int64_t kPhotons = 10000000;

std::int64_t g_photons = kPhotons;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Medium iso(double w, double mu_t = 1.0) { return Medium((1.0 - w) * mu_t, w * mu_t, {1.0}); }

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

McOptions mc_options(std::uint64_t seed) {
  McOptions o;
  o.photons = g_photons;
  o.seed = seed;
  o.batches = 10;
  return o;
}

std::string photon_note() {
  return g_photons == kPhotons ? "" : fmt::format(" [reduced run: {} photons, criterion needs {}]", g_photons, kPhotons);
}

// |mc - ref| <= max(frac ref, 3 sigma); frac = 0 means 3 sigma only
struct McCompare {
  double frac;
  int bad = 0;
  double worst = 0.0;  // in units of the allowed band
  std::string rows;
  void add(const std::string& label, double mc, double err, double ref) {
    const double band = std::max(frac * std::abs(ref), 3.0 * err);
    const double d = std::abs(mc - ref);
    worst = std::max(worst, d / band);
    if (!(d <= band)) ++bad;
    rows += fmt::format("\n      {:<18} mc {:.5e} +- {:.1e}  ref {:.5e}  rel {:+.3f}%", label, mc, err, ref,
                        100.0 * (mc - ref) / ref);
  }
};

// 1. eigenvalues by three routes
Outcome c1() {
  Outcome o{true, ""};
  double worst_bis = 0.0, worst_ado = 0.0, worst_b = 0.0;
  for (double w : {0.3, 0.5, 0.9, 0.99}) {
    const Medium m = iso(w, 2.0);
    const double tri = discrete_eigenvalues(m, 0).nu.at(0);
    auto f = [&](double nu) { return dispersion(m, 0, nu); };
    auto br = boost::math::tools::bisect(f, 1.0 + 1e-14, 1e4, boost::math::tools::eps_tolerance<double>(52));
    const double bis = 0.5 * (br.first + br.second);
    const double ado = build_spectrum(m, 64).xi(0, 0);
    const int L = 9;
    auto A = a_matrix(m, 0, L);
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(L + 1, L + 1);
    for (int i = 0; i <= L; ++i) T(i, i) = A.first[i];
    for (int i = 0; i < L; ++i) T(i, i + 1) = T(i + 1, i) = A.second[i];
    const double a_top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(T).eigenvalues().maxCoeff();
    const double b_top = build_modes(m, L).block(0).lambda.at(0);
    worst_bis = std::max(worst_bis, std::abs(tri - bis));
    worst_ado = std::max(worst_ado, std::abs(ado - bis));
    worst_b = std::max(worst_b, rel(b_top, a_top));
    o.detail += fmt::format("\n      albedo {:<5} tridiagonal {:.12f} bisection {:.12f} ADO(64) {:.12f} B(0) {:.14f} A(0) {:.14f}",
                            w, tri, bis, ado, b_top, a_top);
  }
  o.pass = worst_bis < 1e-8 && worst_ado < 1e-6 && worst_b < 1e-12;
  o.detail = fmt::format("|tri-bisect| {:.1e} (< 1e-8), |ADO-bisect| {:.1e} (< 1e-6), B(0) vs A(0) rel {:.1e} (< 1e-12)",
                         worst_bis, worst_ado, worst_b) +
             o.detail;
  return o;
}

// 2. flatland closed form against the root finder
Outcome c2() {
  double worst = 0.0;
  std::string rows;
  for (double w : {0.2, 0.5, 0.8, 0.95}) {
    const auto s = eigenvalues_2d(Medium2D(1.0 - w, w, {1.0}));
    const double closed = 1.0 / std::sqrt(1.0 - w * w);
    const double d = s.count() == 1 ? std::abs(s.nu[0] - closed) : 1.0;
    worst = std::max(worst, d);
    rows += fmt::format("\n      albedo {:<5} root {:.15f} closed form {:.15f}", w, s.count() ? s.nu[0] : 0.0, closed);
  }
  return {worst < 1e-12, fmt::format("max |root - 1/sqrt(1-w^2)| = {:.1e} (< 1e-12)", worst) + rows};
}

// 3. nu_0 inside the diffusion bracket
Outcome c3() {
  int inside = 0, n = 0;
  std::string rows;
  for (double w : {0.3, 0.5, 0.9, 0.99})
    for (double g : {0.3, 0.5, 0.9}) {
      const Medium m(1.0 - w, w, henyey_greenstein(g, 32));
      const auto [lo, hi] = nu0_bracket(m);
      const double nu0 = discrete_eigenvalues(m, 0).nu.at(0);
      ++n;
      const bool ok = lo <= nu0 && nu0 <= hi;
      inside += ok;
      rows += fmt::format("\n      albedo {:<5} g {:<4} [{:.6f}, {:.6f}] nu_0 {:.6f} {}", w, g, lo, hi, nu0, ok ? "" : "OUTSIDE");
    }
  return {inside == n, fmt::format("{} of {} grid points inside", inside, n) + rows};
}

// 4. rotation homomorphism and orthogonality of the continued d-matrix
Outcome c4() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-1.0, 1.0), P(0.0, 2.0 * kPi);
  double hom = 0.0, uni = 0.0;
  for (double nq : {0.0, 0.3, 1.2}) {
    for (int l1 = 0; l1 <= 4; ++l1)
      for (int m1 = -l1; m1 <= l1; ++m1)
        for (int l2 = 0; l2 <= 4; ++l2)
          for (int m2 = -l2; m2 <= l2; ++m2) {
            if (l1 + l2 > 4) continue;
            const Frame fr = make_frame(1.5, nq / 1.5, P(rng));
            ShExpansion y1(4), y2(4);
            y1.at(l1, m1) = 1.0;
            y2.at(l2, m2) = 1.0;
            const auto r1 = rotate(fr, y1), r2 = rotate(fr, y2), r12 = rotate(fr, sh_product(y1, y2));
            for (int t = 0; t < 6; ++t) {
              const double mu = U(rng), ph = P(rng);
              const cplx lhs = evaluate(r1, mu, ph) * evaluate(r2, mu, ph);
              hom = std::max(hom, std::abs(lhs - evaluate(r12, mu, ph)) / std::max(1.0, std::abs(lhs)));
            }
          }
    const auto d = wigner_d_complex(4, nq);
    for (int l = 0; l <= 4; ++l)
      for (int m = -l; m <= l; ++m)
        for (int mpp = -l; mpp <= l; ++mpp) {
          cplx s = 0.0, scale = 0.0;
          for (int mp = -l; mp <= l; ++mp) {
            s += d[l](mp, m) * d[l](mp, mpp);
            scale += std::abs(d[l](mp, m) * d[l](mp, mpp));
          }
          uni = std::max(uni, std::abs(s - (m == mpp ? 1.0 : 0.0)) / std::max(1.0, std::abs(scale)));
        }
  }
  return {hom < 1e-10 && uni < 1e-10,
          fmt::format("homomorphism residual {:.1e}, sum_m' d d - delta residual {:.1e} (both < 1e-10)", hom, uni)};
}

// 5. rotated-eigenfunction orthogonality under the discrete-ordinates product
Outcome c5() {
  double worst = 0.0;
  std::string rows;
  for (int which = 0; which < 2; ++which) {
    const Medium m = which == 0 ? iso(0.9) : Medium(0.1, 0.9, henyey_greenstein(0.5, 8));
    const auto s = build_spectrum(m, 32);
    for (double q : {0.0, 0.5}) {
      std::vector<RotatedMode> modes;
      for (int n = 0; n < 32; ++n)
        for (int sg : {1, -1}) modes.push_back(rotate_mode(s, 0, n, q, 0.3, sg));
      const Eigen::MatrixXcd g = dom_mu_gram(s, modes);
      double off = 0.0;
      for (Eigen::Index a = 0; a < g.rows(); ++a)
        for (Eigen::Index b = a + 1; b < g.cols(); ++b)
          off = std::max(off, std::abs(g(a, b)) / std::sqrt(std::abs(g(a, a) * g(b, b))));
      worst = std::max(worst, off);
      rows += fmt::format("\n      {} q = {}: max off-diagonal {:.2e}", which == 0 ? "isotropic" : "HG 0.5   ", q, off);
    }
  }
  return {worst < 1e-8, fmt::format("max relative off-diagonal {:.2e} (< 1e-8)", worst) + rows};
}

const std::vector<std::pair<double, double>>& beam_points() {
  static const std::vector<std::pair<double, double>> p = [] {
    std::vector<std::pair<double, double>> v;
    for (double r : {5.0, 10.0})
      for (double z : {-2.0, 1.0, 5.0, 10.0}) v.emplace_back(r, z);
    return v;
  }();
  return p;
}

Medium beam_medium() { return Medium(0.01, 10.0, henyey_greenstein(0.9, 9)); }

std::vector<double>& ado_beam_values() {
  static std::vector<double> v;
  if (v.empty()) {
    const Medium m = beam_medium();
    const auto s = build_spectrum(m, 32);
    for (auto [r, z] : beam_points()) v.push_back(energy_density_beam(s, m, r, z));
  }
  return v;
}

// 6. ADO against MRRF in the infinite medium
Outcome c6() {
  const auto& ado = ado_beam_values();
  const auto basis = build_modes(beam_medium(), 9);
  double worst = 0.0;
  std::string rows;
  for (std::size_t i = 0; i < ado.size(); ++i) {
    const auto [r, z] = beam_points()[i];
    const double mr = energy_density_infinite(basis, r, z);
    worst = std::max(worst, rel(ado[i], mr));
    rows += fmt::format("\n      rho {:>4} z {:>4}: ADO {:.6e} MRRF {:.6e} rel {:.1e}", r, z, ado[i], mr, rel(ado[i], mr));
  }
  return {worst <= 0.01, fmt::format("max relative difference {:.2e} (<= 1e-2)", worst) + rows};
}

// 7. ADO against Monte Carlo for the beam
Outcome c7() {
  const auto& ado = ado_beam_values();
  const Medium m = beam_medium();
  const auto t = run_infinite_beam(m, PhaseSampler::henyey_greenstein(0.9), cylinder_bins(beam_points(), 0.25, 0.25),
                                   mc_options(7));
  McCompare cmp{0.05};
  for (std::size_t i = 0; i < ado.size(); ++i)
    cmp.add(fmt::format("rho {} z {}", beam_points()[i].first, beam_points()[i].second), t.value[i], t.error[i], ado[i]);
  return {cmp.bad == 0 && g_photons == kPhotons,
          fmt::format("{} of {} points outside max(5%, 3 sigma); worst {:.2f} of the band", cmp.bad, ado.size(), cmp.worst) +
              photon_note() + cmp.rows};
}

// 8. MRRF slab against Monte Carlo
Outcome c8() {
  const Medium m(0.01, 0.99, henyey_greenstein(0.5, 9));
  const double ls = 1.0 / (m.mu_a() + (1.0 - m.g()) * m.mu_s());
  const double L = 10.0 * ls;
  std::vector<std::pair<double, double>> pts;
  for (double r : {4.0, 7.0, 10.0})
    for (double z : {1.0, 3.0, 5.0, 7.0, 9.0}) pts.emplace_back(r * ls, z * ls);
  const SlabSolver solver(m, SlabProblem{m.mu_t() * L, 9});
  std::vector<double> ref;
  for (auto [r, z] : pts) ref.push_back(solver.energy_density(r, z));
  const auto t = run_slab(m, PhaseSampler::tabulated(m), L, cylinder_bins(pts, 0.25, 0.25), mc_options(8));
  McCompare cmp{0.05};
  for (std::size_t i = 0; i < pts.size(); ++i)
    cmp.add(fmt::format("rho {:.0f}l* z {:.0f}l*", pts[i].first / ls, pts[i].second / ls), t.value[i], t.error[i], ref[i]);
  return {cmp.bad == 0 && g_photons == kPhotons,
          fmt::format("{} of {} points outside max(5%, 3 sigma); worst {:.2f} of the band; l* = {:.4f}, L = {:.3f}", cmp.bad,
                      pts.size(), cmp.worst, ls, L) +
              photon_note() + cmp.rows};
}

// volume-weighted bin average by Gauss-Legendre
double bin_average(const std::function<double(double)>& f, double a, double b, int dim) {
  auto gl = gauss_legendre(24, a, b);
  double s = 0.0, v = 0.0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) {
    const double wgt = gl.w[i] * std::pow(gl.x[i], dim - 1);
    s += wgt * f(gl.x[i]);
    v += wgt;
  }
  return s / v;
}

// 9. point-source closed form against shell tallies
Outcome c9() {
  const Medium m = iso(0.9);
  const auto spec = discrete_eigenvalues(m, 0);
  const auto bins = shells({0.5, 1.0, 2.0, 5.0}, 0.05);
  const auto t = run_infinite_isotropic(m, PhaseSampler::henyey_greenstein(0.0), bins, mc_options(9));
  McCompare cmp{0.0};
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double ref = bin_average(
        [&](double r) { return energy_density_isotropic_source(m, spec, r) / (4.0 * kPi); }, bins[i].rho_lo,
        bins[i].rho_hi, 3);
    cmp.add(fmt::format("mu_t r {}", 0.5 * (bins[i].rho_lo + bins[i].rho_hi)), t.value[i], t.error[i], ref);
  }
  return {cmp.bad == 0 && g_photons == kPhotons,
          fmt::format("{} of {} shells outside 3 sigma; worst {:.2f} sigma/3", cmp.bad, bins.size(), cmp.worst) +
              photon_note() + cmp.rows};
}

// 10. flatland closed form against 2D Monte Carlo
Outcome c10() {
  const Medium2D m(0.1, 0.9, {1.0});
  const auto spec = eigenvalues_2d(m);
  const auto bins = shells({0.5, 1.0, 2.0}, 0.05);
  const auto t = run_flatland_isotropic(m, bins, mc_options(10));
  McCompare cmp{0.05};
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double ref = bin_average([&](double r) { return density_2d(m, spec, r) / (2.0 * kPi); }, bins[i].rho_lo,
                                   bins[i].rho_hi, 2);
    cmp.add(fmt::format("mu_t x {}", 0.5 * (bins[i].rho_lo + bins[i].rho_hi)), t.value[i], t.error[i], ref);
  }
  return {cmp.bad == 0 && g_photons == kPhotons,
          fmt::format("{} of {} annuli outside max(5%, 3 sigma); worst {:.2f} of the band", cmp.bad, bins.size(), cmp.worst) +
              photon_note() + cmp.rows};
}

// 11. F_N convergence in l_max and agreement with the MRRF half-space flux
Outcome c11() {
  const Medium m(0.05, 100.0, henyey_greenstein(0.001, 9));
  const double q0 = 0.3;
  std::vector<double> J;
  std::string rows;
  for (int L = 5; L <= 13; ++L) {
    const Medium mL(0.05, 100.0, henyey_greenstein(0.001, L));
    const auto sol = solve(build_system(mL, q0, L));
    J.push_back(std::abs(hemispheric_flux(sol)));
    rows += fmt::format("\n      l_max {:>2}: |J+| {:.9f}  condition {:.1e}", L, J.back(), sol.condition);
  }
  bool monotone = true;
  std::string diffs;
  for (std::size_t i = 1; i < J.size(); ++i) {
    const double d = std::abs(J[i] - J[i - 1]);
    diffs += fmt::format(" {:.1e}", d);
    if (i > 1 && !(d < std::abs(J[i - 1] - J[i - 2]))) monotone = false;
  }
  const double mr = half_space_flux(build_modes(m, 9), q0);
  const double d9 = rel(J[4], mr);
  return {monotone && d9 <= 0.01,
          fmt::format("successive differences{} {}; F_N(9) {:.6f} vs MRRF(9) {:.6f}: rel {:.2e} (<= 1e-2)", diffs,
                      monotone ? "shrink monotonically" : "do NOT shrink monotonically", J[4], mr, d9) +
              rows};
}

// 12. pure absorber: ballistic densities in 3D and 2D
Outcome c12() {
  McOptions o = mc_options(12);
  o.photons = 1000000;
  McCompare cmp{0.0};
  const auto b3 = shells({0.5, 1.0, 2.0, 4.0}, 0.05);
  const auto t3 = run_infinite_isotropic(Medium(1.0, 1e-12, {1.0}), PhaseSampler::henyey_greenstein(0.0), b3, o);
  for (std::size_t i = 0; i < b3.size(); ++i)
    cmp.add(fmt::format("3D r {}", 0.5 * (b3[i].rho_lo + b3[i].rho_hi)), t3.value[i], t3.error[i],
            bin_average([](double r) { return std::exp(-r) / (4.0 * kPi * r * r); }, b3[i].rho_lo, b3[i].rho_hi, 3));
  const auto t2 = run_flatland_isotropic(Medium2D(1.0, 1e-12, {1.0}), b3, o);
  for (std::size_t i = 0; i < b3.size(); ++i)
    cmp.add(fmt::format("2D r {}", 0.5 * (b3[i].rho_lo + b3[i].rho_hi)), t2.value[i], t2.error[i],
            bin_average([](double r) { return std::exp(-r) / (2.0 * kPi * r); }, b3[i].rho_lo, b3[i].rho_hi, 2));
  return {cmp.bad == 0, fmt::format("{} of 8 bins outside 3 sigma; worst {:.2f} sigma/3; 1e6 photons each", cmp.bad,
                                    cmp.worst) +
                            cmp.rows};
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      std::string s = argv[++i];
      for (std::size_t p = 0; p < s.size();) {
        const std::size_t q = s.find(',', p);
        only.insert(std::stoi(s.substr(p, q - p)));
        p = q == std::string::npos ? s.size() : q + 1;
      }
    } else if (!std::strcmp(argv[i], "--photons") && i + 1 < argc) {
      g_photons = static_cast<std::int64_t>(std::stod(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: acceptance [--only 1,2,...] [--photons N]\n");
      return 2;
    }
  }
  const std::vector<Criterion> all = {
      {1, "eigenvalue agreement", 5, c1},
      {2, "flatland closed form", 1, c2},
      {3, "diffusion bracket", 5, c3},
      {4, "rotation algebra", 5, c4},
      {5, "rotated orthogonality", 10, c5},
      {6, "ADO vs MRRF infinite medium", 120, c6},
      {7, "Monte Carlo infinite beam", 600, c7},
      {8, "Monte Carlo slab", 900, c8},
      {9, "Monte Carlo point source", 300, c9},
      {10, "flatland Monte Carlo", 300, c10},
      {11, "F_N convergence and cross-check", 300, c11},
      {12, "pure-absorber limits", 120, c12},
  };
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = s < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    const std::size_t cut = o.detail.find('\n');
    const std::string head = o.detail.substr(0, cut), rest = cut == std::string::npos ? "" : o.detail.substr(cut);
    std::printf("%s criterion %2d (%s): %s | runtime %.1f s (limit %.0f s%s)%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                head.c_str(), s, c.limit_s, in_time ? "" : ", EXCEEDED", rest.c_str());
  }
  std::printf("%d criteria failed\n", failed);
  return failed ? 1 : 0;
}
