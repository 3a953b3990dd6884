#include "rrf/medium.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <fmt/format.h>
#include <numbers>

namespace rrf {

namespace {

void check_optics(double mu_a, double mu_s) {
  if (!(mu_a >= 0.0) || !std::isfinite(mu_a)) throw ConfigError("mu_a must be >= 0");
  if (!(mu_s > 0.0) || !std::isfinite(mu_s)) throw ConfigError("mu_s must be > 0");
}

}  // namespace

Medium::Medium(double mu_a, double mu_s, std::vector<double> beta)
    : mu_a_(mu_a), mu_s_(mu_s), beta_(std::move(beta)) {
  check_optics(mu_a, mu_s);
  if (beta_.empty()) beta_.push_back(1.0);
  if (beta_[0] != 1.0) throw ConfigError("beta_0 must equal 1");
  for (std::size_t l = 0; l < beta_.size(); ++l) {
    if (!std::isfinite(beta_[l]) || std::abs(beta_[l]) > 2.0 * l + 1.0 + 1e-12)
      throw ConfigError(fmt::format("|beta_{}| exceeds 2l+1", l));
  }
}

Medium Medium::truncated(int l) const {
  std::vector<double> b(static_cast<std::size_t>(l) + 1, 0.0);
  for (int k = 0; k <= l; ++k) b[k] = beta(k);
  return Medium(mu_a_, mu_s_, std::move(b));
}

std::string Medium::describe() const {
  return fmt::format("mu_a={} mu_s={} g={} l_max={}", mu_a_, mu_s_, g(), l_max());
}

Medium2D::Medium2D(double mu_a, double mu_s, std::vector<double> beta2d)
    : mu_a_(mu_a), mu_s_(mu_s), beta_(std::move(beta2d)) {
  check_optics(mu_a, mu_s);
  if (beta_.empty()) beta_.push_back(1.0);
  if (beta_[0] != 1.0) throw ConfigError("beta2d_0 must equal 1");
  for (double b : beta_)
    if (!(std::abs(b) <= 1.0)) throw ConfigError("beta2d entries must lie in [-1,1]");
}

std::string Medium2D::describe() const {
  return fmt::format("mu_a={} mu_s={} l_max={} (2D)", mu_a_, mu_s_, l_max());
}

std::vector<double> henyey_greenstein(double g, int l_max) {
  if (!(std::abs(g) < 1.0)) throw ConfigError("HG asymmetry must satisfy |g| < 1");
  if (l_max < 0) throw ConfigError("l_max must be >= 0");
  std::vector<double> beta(static_cast<std::size_t>(l_max) + 1);
  double gl = 1.0;
  for (int l = 0; l <= l_max; ++l) {
    beta[l] = (2.0 * l + 1.0) * gl;
    gl *= g;
  }
  return beta;
}

double phase_eval(const Medium& medium, double c) {
  // Legendre series by upward recurrence
  double p0 = 1.0, p1 = c;
  double sum = medium.beta(0);
  if (medium.l_max() >= 1) sum += medium.beta(1) * c;
  for (int l = 1; l < medium.l_max(); ++l) {
    double p2 = ((2.0 * l + 1.0) * c * p1 - l * p0) / (l + 1.0);
    sum += medium.beta(l + 1) * p2;
    p0 = p1;
    p1 = p2;
  }
  return sum / (4.0 * std::numbers::pi);
}

double hg_phase(double g, double c) {
  double d = 1.0 + g * g - 2.0 * g * c;
  return (1.0 - g * g) / (4.0 * std::numbers::pi * d * std::sqrt(d));
}

bool phase_nonnegative(const Medium& medium, int samples) {
  for (int k = 0; k < samples; ++k) {
    double c = -1.0 + 2.0 * k / (samples - 1.0);
    if (phase_eval(medium, c) < 0.0) return false;
  }
  return true;
}

Medium medium_from_keys(double mu_a, double mu_s, const std::string& beta_list, double g, int l_max) {
  if (!beta_list.empty()) {
    std::vector<std::string> parts;
    boost::split(parts, beta_list, boost::is_any_of(", "), boost::token_compress_on);
    std::vector<double> beta;
    for (auto& p : parts) {
      boost::trim(p);
      if (p.empty()) continue;
      try {
        beta.push_back(std::stod(p));
      } catch (const std::exception&) {
        throw ConfigError("bad beta entry '" + p + "'");
      }
    }
    return Medium(mu_a, mu_s, std::move(beta));
  }
  return Medium(mu_a, mu_s, henyey_greenstein(g, l_max));
}

Medium load_medium(const std::string& path) {
  boost::property_tree::ptree pt;
  try {
    boost::property_tree::ini_parser::read_ini(path, pt);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot read medium config: ") + e.what());
  }
  auto mu_a = pt.get_optional<double>("mu_a");
  auto mu_s = pt.get_optional<double>("mu_s");
  if (!mu_a || !mu_s) throw ConfigError("medium config needs mu_a and mu_s");
  auto beta = pt.get_optional<std::string>("beta");
  if (beta) return medium_from_keys(*mu_a, *mu_s, *beta, 0.0, 0);
  auto g = pt.get_optional<double>("g");
  auto l_max = pt.get_optional<int>("l_max");
  if (!g || !l_max) throw ConfigError("medium config needs beta or g and l_max");
  return medium_from_keys(*mu_a, *mu_s, "", *g, *l_max);
}

}  // namespace rrf
