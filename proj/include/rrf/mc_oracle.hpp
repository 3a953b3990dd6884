#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rrf/medium.hpp"

namespace rrf {

// Direction-cosine sampler for one phase function.
class PhaseSampler {
 public:
  // exact inverse CDF
  static PhaseSampler henyey_greenstein(double g);
  // inverse CDF of sum_l beta_l P_l / 4pi on a cosine grid, linear in between
  static PhaseSampler tabulated(const Medium& medium, int grid = 4096);

  double sample_cos(double u) const;
  double mean_cos() const { return mean_; }
  bool is_hg() const { return hg_; }

 private:
  bool hg_ = true;
  double g_ = 0.0;
  double mean_ = 0.0;
  std::vector<double> cdf_;  // on mu_k = -1 + 2k/(n-1)
};

enum class McGeometry { infinite, slab, halfspace, flatland };

// rho in [rho_lo, rho_hi) and z in [z_lo, z_hi); for shells and annuli only rho is used
struct McBin {
  double rho_lo = 0.0, rho_hi = 0.0;
  double z_lo = 0.0, z_hi = 0.0;
};

struct McOptions {
  std::uint64_t seed = 1;
  std::int64_t photons = 100000;
  int batches = 10;
  double roulette_weight = 0.5;
  double roulette_survival = 0.5;
  bool parallel = true;
};

// Track-length tallies. value = c U per bin for a unit-power source, in the
// inverse length units of the medium; error is the batch-mean standard error.
struct TallyGrid {
  McGeometry geometry = McGeometry::infinite;
  std::string bin_kind;  // shell | cylinder | annulus
  double slab_L = 0.0;
  std::vector<McBin> bins;
  std::vector<double> value, error;
  std::int64_t photons = 0;
  std::uint64_t seed = 0;
  int batches = 0;
  // weight bookkeeping, per launched photon
  double absorbed = 0.0;
  double reflected = 0.0;    // left through z = 0
  double transmitted = 0.0;  // left through z = L
  double roulette_killed = 0.0;
  double roulette_added = 0.0;
  std::vector<double> reflected_batches;

  double volume(std::size_t i) const;
  // absorbed + escaped + killed - added, ideally 1
  double balance() const { return absorbed + reflected + transmitted + roulette_killed - roulette_added; }
};

std::vector<McBin> shells(const std::vector<double>& centers, double half_width);
std::vector<McBin> cylinder_bins(const std::vector<std::pair<double, double>>& rho_z, double half_rho, double half_z);

// isotropic point source at the origin; every flight tallied
TallyGrid run_infinite_isotropic(const Medium& medium, const PhaseSampler& phase, std::vector<McBin> bins,
                                 const McOptions& opt);
// pencil beam along +z from the origin; first flight not tallied
TallyGrid run_infinite_beam(const Medium& medium, const PhaseSampler& phase, std::vector<McBin> bins,
                            const McOptions& opt);
// the beam enters the slab 0 < z < L at the origin; first flight not tallied
TallyGrid run_slab(const Medium& medium, const PhaseSampler& phase, double L, std::vector<McBin> bins,
                   const McOptions& opt);
// the beam enters the half space z > 0; reflected is the diffuse albedo
TallyGrid run_halfspace(const Medium& medium, const PhaseSampler& phase, const McOptions& opt);
// isotropic point source and isotropic scattering in the plane
TallyGrid run_flatland_isotropic(const Medium2D& medium, std::vector<McBin> bins, const McOptions& opt);

// length of the segment p + t d, 0 <= t <= s, inside the bin (3D cylinder, or a
// shell / annulus when shell is set)
double segment_length(const double p[3], const double d[3], double s, const McBin& bin, bool shell, bool planar);

}  // namespace rrf
