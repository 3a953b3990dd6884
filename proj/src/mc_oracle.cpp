#include "rrf/mc_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/random/taus88.hpp>


namespace rrf {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::int64_t kChunk = 1024;

// one stream per photon, keyed by (seed, photon index)
struct Rng {
  boost::random::taus88 engine;
  Rng(std::uint64_t seed, std::uint64_t photon) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(photon), static_cast<std::uint32_t>(photon >> 32), 0x9e3779b9u};
    engine.seed(seq);
  }
  // (0, 1)
  double open() { return (static_cast<double>(engine()) + 0.5) * 0x1.0p-32; }
  double unit() { return open(); }
  // uniform point on the unit circle
  void circle(double& c, double& s) {
    double x, y, r2;
    do {
      x = 2.0 * unit() - 1.0;
      y = 2.0 * unit() - 1.0;
      r2 = x * x + y * y;
    } while (r2 > 1.0 || r2 < 1e-12);
    c = (x * x - y * y) / r2;
    s = 2.0 * x * y / r2;
  }
};

// measure of {t in [t0, t1] : a t^2 + 2 b t + c <= r2}
double below(double a, double b, double c, double r2, double t0, double t1) {
  if (t1 <= t0) return 0.0;
  if (a < 1e-300) return c <= r2 ? t1 - t0 : 0.0;
  const double disc = b * b - a * (c - r2);
  if (disc <= 0.0) return 0.0;
  const double sq = std::sqrt(disc);
  const double lo = (-b - sq) / a, hi = (-b + sq) / a;
  return std::max(0.0, std::min(hi, t1) - std::max(lo, t0));
}

struct Counters {
  double absorbed = 0, reflected = 0, transmitted = 0, killed = 0, added = 0;
  void operator+=(const Counters& o) {
    absorbed += o.absorbed;
    reflected += o.reflected;
    transmitted += o.transmitted;
    killed += o.killed;
    added += o.added;
  }
};

struct Setup {
  McGeometry geometry;
  double mu_t, albedo, L;
  bool planar, shell, tally_first;
  const PhaseSampler* phase;
  const std::vector<McBin>* bins;
};

void rotate_direction(double d[3], double mu, double cp, double sp) {
  const double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  if (std::abs(d[2]) > 0.99999) {
    const double s = d[2] > 0 ? 1.0 : -1.0;
    d[0] = st * cp;
    d[1] = st * sp;
    d[2] = s * mu;
    return;
  }
  const double t = std::sqrt(1.0 - d[2] * d[2]), r = st / t;
  const double x = r * (d[0] * d[2] * cp - d[1] * sp) + d[0] * mu;
  const double y = r * (d[1] * d[2] * cp + d[0] * sp) + d[1] * mu;
  const double z = -st * cp * t + d[2] * mu;
  const double n = 1.0 / std::sqrt(x * x + y * y + z * z);
  d[0] = x * n;
  d[1] = y * n;
  d[2] = z * n;
}

void tally(const Setup& s, const double p[3], const double d[3], double len, double w, double* acc) {
  const auto& bins = *s.bins;
  const double za = std::min(p[2], p[2] + len * d[2]), zb = std::max(p[2], p[2] + len * d[2]);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (!s.shell && (zb < bins[i].z_lo || za >= bins[i].z_hi)) continue;
    const double l = segment_length(p, d, len, bins[i], s.shell, s.planar);
    if (l > 0.0) acc[i] += w * l;
  }
}

void run_photon(const Setup& s, Rng& rng, double* acc, Counters& c, const McOptions& opt) {
  double cp, sp;
  double p[3] = {0, 0, 0}, d[3] = {0, 0, 1};
  if (s.geometry == McGeometry::infinite && !s.tally_first) {
    // beam: direction stays +z
  } else if (s.planar) {
    rng.circle(d[0], d[1]);
    d[2] = 0.0;
  } else if (s.geometry == McGeometry::infinite) {
    const double mu = 2.0 * rng.unit() - 1.0, st = std::sqrt(1.0 - mu * mu);
    rng.circle(cp, sp);
    d[0] = st * cp;
    d[1] = st * sp;
    d[2] = mu;
  }
  double w = 1.0;
  bool counting = s.tally_first;
  const bool bounded = s.geometry == McGeometry::slab || s.geometry == McGeometry::halfspace;
  for (;;) {
    double step = -std::log(rng.open()) / s.mu_t;
    if (bounded) {
      const double z1 = p[2] + step * d[2];
      int exit = 0;
      if (z1 < 0.0) {
        step = -p[2] / d[2];
        exit = 1;
      } else if (s.geometry == McGeometry::slab && z1 > s.L) {
        step = (s.L - p[2]) / d[2];
        exit = 2;
      }
      if (exit) {
        if (counting) tally(s, p, d, step, w, acc);
        (exit == 1 ? c.reflected : c.transmitted) += w;
        return;
      }
    }
    if (counting) tally(s, p, d, step, w, acc);
    for (int k = 0; k < 3; ++k) p[k] += step * d[k];
    counting = true;
    c.absorbed += w * (1.0 - s.albedo);
    w *= s.albedo;
    if (w < opt.roulette_weight) {
      if (w > 0.0 && rng.unit() < opt.roulette_survival) {
        const double nw = w / opt.roulette_survival;
        c.added += nw - w;
        w = nw;
      } else {
        c.killed += w;
        return;
      }
    }
    if (s.planar) {
      rng.circle(d[0], d[1]);
    } else {
      const double mu = s.phase->sample_cos(rng.unit());
      rng.circle(cp, sp);
      rotate_direction(d, mu, cp, sp);
    }
  }
}

TallyGrid run(const Setup& s, const McOptions& opt) {
  if (opt.photons < 1) throw ConfigError("mc: photons must be >= 1");
  if (opt.batches < 2) throw ConfigError("mc: need at least two batches");
  if (opt.photons < opt.batches) throw ConfigError("mc: fewer photons than batches");
  if (!(opt.roulette_survival > 0.0 && opt.roulette_survival <= 1.0)) throw ConfigError("mc: roulette survival in (0,1]");
  const int B = opt.batches;
  const std::size_t nb = s.bins->size();
  // chunk layout: chunks never straddle a batch
  std::vector<std::int64_t> first(B + 1);
  for (int b = 0; b <= B; ++b) first[b] = opt.photons * b / B;
  std::vector<std::int64_t> chunk_start;
  std::vector<int> chunk_batch;
  for (int b = 0; b < B; ++b)
    for (std::int64_t i = first[b]; i < first[b + 1]; i += kChunk) {
      chunk_start.push_back(i);
      chunk_batch.push_back(b);
    }
  const std::int64_t nc = static_cast<std::int64_t>(chunk_start.size());
  std::vector<double> acc(static_cast<std::size_t>(nc) * (nb + 1), 0.0);
  std::vector<Counters> cnt(static_cast<std::size_t>(nc));
  auto body = [&](std::int64_t ci) {
    const int b = chunk_batch[ci];
    const std::int64_t end = std::min(chunk_start[ci] + kChunk, first[b + 1]);
    double* a = acc.data() + ci * static_cast<std::int64_t>(nb + 1);
    Counters& c = cnt[ci];
    const double before = c.reflected;
    for (std::int64_t i = chunk_start[ci]; i < end; ++i) {
      Rng rng(opt.seed, static_cast<std::uint64_t>(i));
      run_photon(s, rng, a, c, opt);
    }
    a[nb] = c.reflected - before;
  };
  if (opt.parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t ci = 0; ci < nc; ++ci) body(ci);
  } else {
    for (std::int64_t ci = 0; ci < nc; ++ci) body(ci);
  }
  TallyGrid t;
  t.geometry = s.geometry;
  t.bin_kind = s.shell ? (s.planar ? "annulus" : "shell") : "cylinder";
  t.slab_L = s.L;
  t.bins = *s.bins;
  t.photons = opt.photons;
  t.seed = opt.seed;
  t.batches = B;
  std::vector<std::vector<double>> batch(B, std::vector<double>(nb + 1, 0.0));
  Counters total;
  for (std::int64_t ci = 0; ci < nc; ++ci) {
    for (std::size_t i = 0; i <= nb; ++i) batch[chunk_batch[ci]][i] += acc[ci * (nb + 1) + i];
    total += cnt[ci];
  }
  t.value.assign(nb, 0.0);
  t.error.assign(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    std::vector<double> m(B);
    for (int b = 0; b < B; ++b) m[b] = batch[b][i] / (t.volume(i) * double(first[b + 1] - first[b]));
    double mean = 0.0;
    for (double v : m) mean += v;
    mean /= B;
    double var = 0.0;
    for (double v : m) var += (v - mean) * (v - mean);
    t.value[i] = mean;
    t.error[i] = std::sqrt(var / (B - 1.0) / B);
  }
  for (int b = 0; b < B; ++b) t.reflected_batches.push_back(batch[b][nb] / double(first[b + 1] - first[b]));
  const double n = static_cast<double>(opt.photons);
  t.absorbed = total.absorbed / n;
  t.reflected = total.reflected / n;
  t.transmitted = total.transmitted / n;
  t.roulette_killed = total.killed / n;
  t.roulette_added = total.added / n;
  return t;
}

void check_bins(const std::vector<McBin>& bins, bool cylinder) {
  for (const auto& b : bins) {
    if (!(b.rho_hi > b.rho_lo && b.rho_lo >= 0.0)) throw ConfigError("mc: bin needs 0 <= rho_lo < rho_hi");
    if (cylinder && !(b.z_hi > b.z_lo)) throw ConfigError("mc: bin needs z_lo < z_hi");
  }
}

void check_medium(const Medium& m) {
  if (!(m.mu_t() > 0.0)) throw ConfigError("mc: mu_t must be positive");
}

}  // namespace

PhaseSampler PhaseSampler::henyey_greenstein(double g) {
  if (!(g > -1.0 && g < 1.0)) throw ConfigError("mc: HG g must lie in (-1, 1)");
  PhaseSampler p;
  p.hg_ = true;
  p.g_ = g;
  p.mean_ = g;
  return p;
}

PhaseSampler PhaseSampler::tabulated(const Medium& medium, int grid) {
  if (grid < 16) throw ConfigError("mc: phase grid too small");
  PhaseSampler p;
  p.hg_ = false;
  p.mean_ = medium.g();
  std::vector<double> f(grid);
  double top = 0.0;
  for (int k = 0; k < grid; ++k) {
    f[k] = phase_eval(medium, -1.0 + 2.0 * k / (grid - 1.0));
    top = std::max(top, f[k]);
  }
  for (double& v : f) {
    if (v < -1e-9 * top) throw ConfigError("mc: phase function is negative; it cannot be sampled");
    v = std::max(v, 0.0);
  }
  p.cdf_.assign(grid, 0.0);
  const double h = 2.0 / (grid - 1.0);
  for (int k = 1; k < grid; ++k) p.cdf_[k] = p.cdf_[k - 1] + 0.5 * h * (f[k - 1] + f[k]);
  const double norm = p.cdf_.back();
  for (double& v : p.cdf_) v /= norm;
  return p;
}

double PhaseSampler::sample_cos(double u) const {
  if (hg_) {
    if (std::abs(g_) < 1e-8) return 2.0 * u - 1.0;
    const double f = (1.0 - g_ * g_) / (1.0 - g_ + 2.0 * g_ * u);
    return std::clamp((1.0 + g_ * g_ - f * f) / (2.0 * g_), -1.0, 1.0);
  }
  const std::size_t n = cdf_.size();
  std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  k = std::clamp<std::size_t>(k, 1, n - 1);
  const double c0 = cdf_[k - 1], c1 = cdf_[k];
  const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
  return std::clamp(-1.0 + 2.0 * (k - 1.0 + frac) / (n - 1.0), -1.0, 1.0);
}

double TallyGrid::volume(std::size_t i) const {
  const McBin& b = bins[i];
  if (bin_kind == "shell") return 4.0 / 3.0 * kPi * (std::pow(b.rho_hi, 3) - std::pow(b.rho_lo, 3));
  const double area = kPi * (b.rho_hi * b.rho_hi - b.rho_lo * b.rho_lo);
  return bin_kind == "annulus" ? area : area * (b.z_hi - b.z_lo);
}

std::vector<McBin> shells(const std::vector<double>& centers, double half_width) {
  std::vector<McBin> out;
  for (double r : centers) out.push_back(McBin{std::max(0.0, r - half_width), r + half_width, 0.0, 0.0});
  return out;
}

std::vector<McBin> cylinder_bins(const std::vector<std::pair<double, double>>& rho_z, double half_rho, double half_z) {
  std::vector<McBin> out;
  for (auto [rho, z] : rho_z)
    out.push_back(McBin{std::max(0.0, rho - half_rho), rho + half_rho, z - half_z, z + half_z});
  return out;
}

double segment_length(const double p[3], const double d[3], double s, const McBin& bin, bool shell, bool planar) {
  double t0 = 0.0, t1 = s;
  double a, b, c;
  if (shell) {
    const int n = planar ? 2 : 3;
    a = b = c = 0.0;
    for (int k = 0; k < n; ++k) {
      a += d[k] * d[k];
      b += p[k] * d[k];
      c += p[k] * p[k];
    }
  } else {
    if (std::abs(d[2]) < 1e-300) {
      if (p[2] < bin.z_lo || p[2] >= bin.z_hi) return 0.0;
    } else {
      double za = (bin.z_lo - p[2]) / d[2], zb = (bin.z_hi - p[2]) / d[2];
      if (za > zb) std::swap(za, zb);
      t0 = std::max(t0, za);
      t1 = std::min(t1, zb);
      if (t1 <= t0) return 0.0;
    }
    a = d[0] * d[0] + d[1] * d[1];
    b = p[0] * d[0] + p[1] * d[1];
    c = p[0] * p[0] + p[1] * p[1];
  }
  return below(a, b, c, bin.rho_hi * bin.rho_hi, t0, t1) - below(a, b, c, bin.rho_lo * bin.rho_lo, t0, t1);
}

TallyGrid run_infinite_isotropic(const Medium& medium, const PhaseSampler& phase, std::vector<McBin> bins,
                                 const McOptions& opt) {
  check_medium(medium);
  check_bins(bins, false);
  Setup s{McGeometry::infinite, medium.mu_t(), medium.albedo(), 0.0, false, true, true, &phase, &bins};
  return run(s, opt);
}

TallyGrid run_infinite_beam(const Medium& medium, const PhaseSampler& phase, std::vector<McBin> bins,
                            const McOptions& opt) {
  check_medium(medium);
  check_bins(bins, true);
  Setup s{McGeometry::infinite, medium.mu_t(), medium.albedo(), 0.0, false, false, false, &phase, &bins};
  return run(s, opt);
}

TallyGrid run_slab(const Medium& medium, const PhaseSampler& phase, double L, std::vector<McBin> bins,
                   const McOptions& opt) {
  check_medium(medium);
  check_bins(bins, true);
  if (!(L > 0.0)) throw ConfigError("mc: slab thickness must be positive");
  Setup s{McGeometry::slab, medium.mu_t(), medium.albedo(), L, false, false, false, &phase, &bins};
  return run(s, opt);
}

TallyGrid run_halfspace(const Medium& medium, const PhaseSampler& phase, const McOptions& opt) {
  check_medium(medium);
  std::vector<McBin> none;
  Setup s{McGeometry::halfspace, medium.mu_t(), medium.albedo(), std::numeric_limits<double>::infinity(),
          false, false, false, &phase, &none};
  return run(s, opt);
}

TallyGrid run_flatland_isotropic(const Medium2D& medium, std::vector<McBin> bins, const McOptions& opt) {
  if (!(medium.mu_t() > 0.0)) throw ConfigError("mc: mu_t must be positive");
  if (medium.l_max() > 0)
    for (int m = 1; m <= medium.l_max(); ++m)
      if (medium.beta(m) != 0.0) throw ConfigError("mc: flatland run needs isotropic scattering");
  check_bins(bins, false);
  static const PhaseSampler iso = PhaseSampler::henyey_greenstein(0.0);
  Setup s{McGeometry::flatland, medium.mu_t(), medium.albedo(), 0.0, true, true, true, &iso, &bins};
  return run(s, opt);
}

}  // namespace rrf
