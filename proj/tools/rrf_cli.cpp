#include <omp.h>

#include <CLI11.hpp>
#include <boost/math/tools/roots.hpp>
#include <fmt/format.h>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "rrf/ado3d.hpp"
#include "rrf/caseology.hpp"
#include "rrf/flatland.hpp"
#include "rrf/fn3d.hpp"
#include "rrf/mc_oracle.hpp"
#include "rrf/mrrf.hpp"

using namespace rrf;
using json = nlohmann::ordered_json;

namespace {

struct MediumFlags {
  std::string config;
  double mu_a = -1.0, mu_s = -1.0, omega = -1.0, mu_t = 1.0, g = 0.0;
  int l_max = -1;
  std::string beta;
};

struct Globals {
  std::string out;
  int threads = 0;
  std::uint64_t seed = 1;
  MediumFlags medium;
};

Medium resolve_medium(const MediumFlags& f) {
  if (!f.config.empty()) return load_medium(f.config);
  double mu_a = f.mu_a, mu_s = f.mu_s;
  if (f.omega >= 0.0) {
    if (f.omega >= 1.0) throw ConfigError("--omega must be < 1");
    if (!(f.mu_t > 0.0)) throw ConfigError("--mu-t must be positive");
    mu_s = f.omega * f.mu_t;
    mu_a = (1.0 - f.omega) * f.mu_t;
  }
  if (mu_a < 0.0 || mu_s < 0.0) throw ConfigError("give --omega, or --mu-a and --mu-s, or --config");
  const int L = f.l_max >= 0 ? f.l_max : (f.g == 0.0 ? 0 : 9);
  return medium_from_keys(mu_a, mu_s, f.beta, f.g, L);
}

Medium2D resolve_medium_2d(const MediumFlags& f) {
  const Medium m = resolve_medium(f);
  std::vector<double> beta;
  if (!f.beta.empty()) {
    beta = m.beta();
  } else {
    const int L = f.l_max >= 0 ? f.l_max : (f.g == 0.0 ? 0 : 9);
    for (int k = 0; k <= L; ++k) beta.push_back(std::pow(f.g, k));
  }
  return Medium2D(m.mu_a(), m.mu_s(), beta);
}

std::vector<double> parse_grid(const std::string& spec, const std::string& name) {
  if (spec.empty()) return {};
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  try {
    if (parts.size() == 1) return {std::stod(parts[0])};
    if (parts.size() == 3) {
      const double a = std::stod(parts[0]), b = std::stod(parts[1]);
      const int n = std::stoi(parts[2]);
      if (n < 1) throw ConfigError(name + ": grid needs at least one point");
      std::vector<double> v;
      for (int i = 0; i < n; ++i) v.push_back(n == 1 ? a : a + (b - a) * i / (n - 1.0));
      return v;
    }
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
  }
  throw ConfigError(name + ": expected a value or a:b:n, got '" + spec + "'");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
  return h;
}

// CSV with the comment header; the manifest goes next to --out
class Output {
 public:
  Output(const Globals& g, std::string method, json config) : g_(g), method_(std::move(method)), config_(std::move(config)) {}

  void write(const std::string& medium, const std::string& grid, const std::string& columns,
             const std::vector<std::vector<double>>& rows) {
    const std::string hash = fmt::format("{:016x}", fnv1a(config_.dump()));
    std::ostringstream os;
    os << "# method: " << method_ << "\n# medium: " << medium << "\n# grid: " << grid << "\n# version: " << RRF_VERSION
       << "\n# config-hash: " << hash << "\n"
       << columns << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << fmt::format("{:.10g}", r[i]);
      os << "\n";
    }
    if (g_.out.empty()) {
      std::cout << os.str();
      return;
    }
    std::ofstream f(g_.out);
    if (!f) throw ConfigError("cannot write " + g_.out);
    f << os.str();
    json manifest = {{"method", method_}, {"version", RRF_VERSION}, {"config_hash", hash}, {"output", g_.out},
                     {"rows", rows.size()}, {"config", config_}};
    std::ofstream(g_.out + ".json") << manifest.dump(2) << "\n";
  }

 private:
  const Globals& g_;
  std::string method_;
  json config_;
};

json medium_json(const Medium& m) {
  return {{"mu_a", m.mu_a()}, {"mu_s", m.mu_s()}, {"mu_t", m.mu_t()}, {"albedo", m.albedo()}, {"beta", m.beta()}};
}

// all sign changes of Lambda^m on a log grid above 1, refined by bisection
std::vector<double> bisect_eigenvalues(const Medium& m, int mm) {
  const int n = 4000;
  std::vector<double> roots;
  auto f = [&](double nu) { return dispersion(m, mm, nu); };
  double hi = 1e4, fhi = f(hi);
  for (int k = 1; k <= n; ++k) {
    const double lo = 1.0 + std::exp(std::log(1e4) - k * (std::log(1e4) - std::log(1e-10)) / n);
    const double flo = f(lo);
    if (std::signbit(flo) != std::signbit(fhi)) {
      auto r = boost::math::tools::bisect(f, lo, hi, boost::math::tools::eps_tolerance<double>(50));
      roots.push_back(0.5 * (r.first + r.second));
    }
    hi = lo;
    fhi = flo;
  }
  return roots;
}

struct EigenOpts {
  int m = 0;
  std::string method = "tridiagonal";
  bool flatland = false;
  int N = 64;
};

void cmd_eigen(const Globals& g, const EigenOpts& o) {
  const std::string method = o.flatland ? "flatland" : o.method;
  std::vector<std::vector<double>> rows;
  std::string medium;
  json cfg;
  if (method == "flatland") {
    const Medium2D m = resolve_medium_2d(g.medium);
    medium = m.describe();
    auto s = eigenvalues_2d(m);
    for (int j = 0; j < s.count(); ++j) rows.push_back({double(j), s.nu[j]});
    cfg = {{"mu_a", m.mu_a()}, {"mu_s", m.mu_s()}, {"beta2d", m.beta()}};
    cfg["method"] = method;
    Output(g, "eigen/flatland", cfg).write(medium, "2D discrete spectrum", "j,nu", rows);
    return;
  }
  const Medium m = resolve_medium(g.medium);
  medium = m.describe();
  const auto [lo, hi] = nu0_bracket(m);
  std::vector<double> nu;
  if (method == "tridiagonal") {
    nu = discrete_eigenvalues(m, o.m).nu;
  } else if (method == "bisect") {
    nu = bisect_eigenvalues(m, o.m);
  } else if (method == "ado") {
    const auto s = build_spectrum(m, o.N);
    for (const auto& md : s.block(o.m).modes)
      if (md.xi > 1.0) nu.push_back(md.xi);
  } else {
    throw ConfigError("unknown eigen method '" + method + "'");
  }
  for (std::size_t j = 0; j < nu.size(); ++j) rows.push_back({double(j), nu[j], lo, hi});
  cfg = medium_json(m);
  cfg["m"] = o.m;
  cfg["method"] = method;
  if (method == "ado") cfg["N"] = o.N;
  Output(g, "eigen/" + method, cfg)
      .write(medium, fmt::format("m = {}", o.m), "j,nu,bracket_lo,bracket_hi", rows);
}

struct DensityOpts {
  std::string method;
  std::string z, rho;
  double L = -1.0;
  int N = 32;
};

void cmd_density(const Globals& g, const DensityOpts& o) {
  const auto zs = parse_grid(o.z, "--z-grid");
  const auto rhos = parse_grid(o.rho, "--rho-grid");
  if (zs.empty() && o.method != "flatland") throw ConfigError("density needs --z or --z-grid");
  std::vector<std::vector<double>> rows;
  std::string medium, columns = "rho,z,value";
  json cfg;
  if (o.method == "flatland") {
    const Medium2D m = resolve_medium_2d(g.medium);
    medium = m.describe();
    const auto xs = rhos.empty() ? zs : rhos;
    if (xs.empty()) throw ConfigError("flatland density needs --rho or --rho-grid");
    const auto spec = eigenvalues_2d(m);
    for (double x : xs) rows.push_back({x, density_2d(m, spec, m.mu_t() * x)});
    columns = "r,value";
    cfg = {{"mu_a", m.mu_a()}, {"mu_s", m.mu_s()}, {"beta2d", m.beta()}};
  } else {
    const Medium m = resolve_medium(g.medium);
    medium = m.describe();
    cfg = medium_json(m);
    if (o.method == "case1d") {
      const auto spec = discrete_eigenvalues(m, 0);
      for (double z : zs) rows.push_back({0.0, z, energy_density_isotropic_source(m, spec, m.mu_t() * std::abs(z))});
    } else {
      if (rhos.empty()) throw ConfigError("density needs --rho or --rho-grid");
      if (o.method == "ado") {
        const auto spec = build_spectrum(m, o.N);
        cfg["N"] = o.N;
        for (double r : rhos)
          for (double z : zs) rows.push_back({r, z, energy_density_beam(spec, m, r, z)});
      } else if (o.method == "mrrf") {
        const auto basis = build_modes(m, m.l_max());
        for (double r : rhos)
          for (double z : zs) rows.push_back({r, z, energy_density_infinite(basis, r, z)});
      } else if (o.method == "slab") {
        if (!(o.L > 0.0)) throw ConfigError("slab density needs --L > 0");
        const SlabSolver solver(m, SlabProblem{m.mu_t() * o.L, std::max(1, m.l_max())});
        cfg["L"] = o.L;
        for (double r : rhos)
          for (double z : zs) rows.push_back({r, z, solver.energy_density(r, z)});
      } else {
        throw ConfigError("unknown density method '" + o.method + "'");
      }
    }
  }
  cfg["method"] = o.method;
  cfg["z"] = o.z;
  cfg["rho"] = o.rho;
  Output(g, "density/" + o.method, cfg)
      .write(medium, fmt::format("rho = {}, z = {}", o.rho.empty() ? "-" : o.rho, o.z.empty() ? "-" : o.z), columns,
             rows);
}

struct McOpts {
  std::string geometry, photons, r, rho, z;
  double half_width = 0.05, half_z = 0.25, L = -1.0;
  int batches = 10;
};

void cmd_mc(const Globals& g, const McOpts& o) {
  double np = 0.0;
  try {
    np = std::stod(o.photons);
  } catch (const std::exception&) {
    throw ConfigError("--photons: not a number");
  }
  if (!(np >= 1.0) || np > 1e12 || np != std::floor(np)) throw ConfigError("--photons must be a positive integer");
  McOptions opt;
  opt.photons = static_cast<std::int64_t>(np);
  opt.seed = g.seed;
  opt.batches = o.batches;
  std::vector<std::vector<double>> rows;
  std::string medium;
  json cfg;
  TallyGrid t;
  if (o.geometry == "flatland") {
    const Medium2D m = resolve_medium_2d(g.medium);
    medium = m.describe();
    t = run_flatland_isotropic(m, shells(parse_grid(o.r, "--r-grid"), o.half_width), opt);
    cfg = {{"mu_a", m.mu_a()}, {"mu_s", m.mu_s()}, {"beta2d", m.beta()}};
  } else {
    const Medium m = resolve_medium(g.medium);
    medium = m.describe();
    cfg = medium_json(m);
    // flags with g sample the exact HG; explicit moments are tabulated when they can be
    const bool explicit_beta = !g.medium.beta.empty() || !g.medium.config.empty();
    const PhaseSampler ph = explicit_beta && phase_nonnegative(m) ? PhaseSampler::tabulated(m)
                            : PhaseSampler::henyey_greenstein(explicit_beta ? m.g() : g.medium.g);
    cfg["phase"] = ph.is_hg() ? "hg" : "tabulated";
    std::vector<std::pair<double, double>> pts;
    for (double r : parse_grid(o.rho, "--rho-grid"))
      for (double z : parse_grid(o.z, "--z-grid")) pts.emplace_back(r, z);
    if (o.geometry == "infinite") {
      t = run_infinite_isotropic(m, ph, shells(parse_grid(o.r, "--r-grid"), o.half_width), opt);
    } else if (o.geometry == "beam") {
      t = run_infinite_beam(m, ph, cylinder_bins(pts, o.half_width, o.half_z), opt);
    } else if (o.geometry == "slab") {
      t = run_slab(m, ph, o.L, cylinder_bins(pts, o.half_width, o.half_z), opt);
      cfg["L"] = o.L;
    } else if (o.geometry == "halfspace") {
      t = run_halfspace(m, ph, opt);
    } else {
      throw ConfigError("unknown geometry '" + o.geometry + "'");
    }
  }
  for (std::size_t i = 0; i < t.bins.size(); ++i) {
    const auto& b = t.bins[i];
    if (t.bin_kind == "cylinder")
      rows.push_back({b.rho_lo, b.rho_hi, b.z_lo, b.z_hi, t.value[i], t.error[i]});
    else
      rows.push_back({b.rho_lo, b.rho_hi, t.value[i], t.error[i]});
  }
  const std::string columns =
      t.bin_kind == "cylinder" ? "bin_lo,bin_hi,z_lo,z_hi,value,stderr" : "bin_lo,bin_hi,value,stderr";
  cfg["geometry"] = o.geometry;
  cfg["n_photons"] = opt.photons;
  cfg["seed"] = opt.seed;
  cfg["batches"] = opt.batches;
  cfg["bins"] = t.bin_kind;
  cfg["reflected"] = t.reflected;
  cfg["transmitted"] = t.transmitted;
  cfg["absorbed"] = t.absorbed;
  Output(g, "mc/" + o.geometry, cfg)
      .write(medium, fmt::format("{} bins, {} photons, seed {}, reflected {:.6g}", t.bin_kind, opt.photons, opt.seed,
                                 t.reflected),
             columns, rows);
}

struct FnOpts {
  double q0 = 0.0;
  std::string orders = "9";
};

void cmd_fn(const Globals& g, const FnOpts& o) {
  const Medium m = resolve_medium(g.medium);
  if (o.q0 < 0.0) throw ConfigError("--q0 must be >= 0");
  std::vector<std::vector<double>> rows;
  for (double L : parse_grid(o.orders, "--orders")) {
    const int l = static_cast<int>(std::lround(L));
    const auto sol = solve(build_system(m, o.q0 / m.mu_t(), l));
    rows.push_back({double(l), std::abs(hemispheric_flux(sol)), sol.condition});
  }
  json cfg = medium_json(m);
  cfg["q0"] = o.q0;
  cfg["q0_mu_t_units"] = o.q0 / m.mu_t();
  cfg["orders"] = o.orders;
  Output(g, "fn-flux", cfg).write(m.describe(), fmt::format("q0 = {}, orders {}", o.q0, o.orders), "l_max,J_plus,condition",
                                  rows);
}

void add_medium_flags(CLI::App* app, MediumFlags& f) {
  app->add_option("--mu-a", f.mu_a, "absorption coefficient [1/length]");
  app->add_option("--mu-s", f.mu_s, "scattering coefficient [1/length]");
  app->add_option("--omega", f.omega, "single-scattering albedo (with --mu-t)");
  app->add_option("--mu-t", f.mu_t, "total attenuation when --omega is used");
  app->add_option("--g", f.g, "Henyey-Greenstein anisotropy");
  app->add_option("--l-max", f.l_max, "phase-function truncation degree");
  app->add_option("--beta", f.beta, "explicit phase moments b0,b1,...");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radiative transfer solvers"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Globals g;
  app.add_option("--config", g.medium.config, "medium key/value file (mu_a, mu_s, g + l_max or beta)");
  app.add_option("--out", g.out, "output CSV path; a .json manifest is written next to it");
  app.add_option("--threads", g.threads, "OpenMP threads (0 keeps the default)");
  app.add_option("--seed", g.seed, "Monte Carlo seed");

  EigenOpts eo;
  auto* eigen = app.add_subcommand("eigen", "discrete eigenvalues");
  add_medium_flags(eigen, g.medium);
  eigen->add_option("--m", eo.m, "azimuthal order");
  eigen->add_option("--method", eo.method, "tridiagonal | bisect | ado | flatland");
  eigen->add_flag("--flatland", eo.flatland, "2D spectrum");
  eigen->add_option("--N", eo.N, "ADO half-range order");

  DensityOpts d_all, d_slab, d_ado, d_mrrf, d_flat;
  auto density_flags = [&](CLI::App* c, DensityOpts& o, bool with_method) {
    add_medium_flags(c, g.medium);
    if (with_method) c->add_option("--method", o.method, "case1d | ado | mrrf | slab | flatland")->required();
    c->add_option("--z,--z-grid", o.z, "depth value or a:b:n [length]");
    c->add_option("--rho,--rho-grid", o.rho, "radial value or a:b:n [length]");
    c->add_option("--L", o.L, "slab thickness [length]");
    c->add_option("--N", o.N, "ADO half-range order");
  };
  auto* density = app.add_subcommand("density", "energy-density profile");
  density_flags(density, d_all, true);
  auto* slab = app.add_subcommand("slab-density", "MRRF slab energy density");
  density_flags(slab, d_slab, false);
  auto* ado = app.add_subcommand("ado-density", "ADO beam energy density");
  density_flags(ado, d_ado, false);
  auto* mrrf = app.add_subcommand("mrrf-density", "MRRF infinite-medium beam energy density");
  density_flags(mrrf, d_mrrf, false);
  auto* flat = app.add_subcommand("flatland", "2D point-source density");
  density_flags(flat, d_flat, false);

  McOpts mo;
  auto* mc = app.add_subcommand("mc", "Monte Carlo tallies");
  add_medium_flags(mc, g.medium);
  mc->add_option("--geometry", mo.geometry, "infinite | beam | slab | halfspace | flatland")->required();
  mc->add_option("--photons", mo.photons, "photon count, e.g. 1e6")->required();
  mc->add_option("--r-grid", mo.r, "shell or annulus centres a:b:n");
  mc->add_option("--rho-grid", mo.rho, "cylinder-bin radii a:b:n");
  mc->add_option("--z-grid", mo.z, "cylinder-bin depths a:b:n");
  mc->add_option("--half-width", mo.half_width, "radial half width of each bin");
  mc->add_option("--half-z", mo.half_z, "depth half width of cylinder bins");
  mc->add_option("--L", mo.L, "slab thickness");
  mc->add_option("--batches", mo.batches, "batches for the error estimate");

  FnOpts fo;
  auto* fn = app.add_subcommand("fn-flux", "F_N half-space exit flux");
  add_medium_flags(fn, g.medium);
  fn->add_option("--q0", fo.q0, "transverse wavenumber [1/length]");
  fn->add_option("--orders", fo.orders, "l_max value or a:b:n");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    if (g.threads > 0) omp_set_num_threads(g.threads);
    if (eigen->parsed()) cmd_eigen(g, eo);
    if (density->parsed()) cmd_density(g, d_all);
    if (slab->parsed()) cmd_density(g, (d_slab.method = "slab", d_slab));
    if (ado->parsed()) cmd_density(g, (d_ado.method = "ado", d_ado));
    if (mrrf->parsed()) cmd_density(g, (d_mrrf.method = "mrrf", d_mrrf));
    if (flat->parsed()) cmd_density(g, (d_flat.method = "flatland", d_flat));
    if (mc->parsed()) cmd_mc(g, mo);
    if (fn->parsed()) cmd_fn(g, fo);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
