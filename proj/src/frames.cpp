#include "rrf/frames.hpp"

#include <numbers>

namespace rrf {

cplx branch_sqrt(cplx z) {
  cplx r = std::sqrt(z);
  if (r.imag() < 0.0) r = -r;
  return r;
}

// k = z at q = 0 has no azimuth; take zero so the frame is the identity
double Frame::phi_k() const {
  if (q == 0.0) return 0.0;
  return nu > 0.0 ? phi_q + std::numbers::pi : phi_q;
}

Frame make_frame(double nu, double q, double phi_q) {
  if (nu == 0.0) throw ConfigError("frame: nu must be nonzero");
  if (q < 0.0) throw ConfigError("frame: q must be >= 0");
  return Frame{nu, q, phi_q};
}

ShExpansion rotate(const Frame& frame, const ShExpansion& f) {
  auto d = wigner_d_complex(f.l_max, frame.tau_arg());
  const double pk = frame.phi_k();
  ShExpansion out(f.l_max);
  for (int l = 0; l <= f.l_max; ++l)
    for (int mp = -l; mp <= l; ++mp) {
      cplx s = 0.0;
      for (int m = -l; m <= l; ++m) s += f(l, m) * d[l](mp, m);
      out.at(l, mp) = s * std::polar(1.0, -mp * pk);
    }
  return out;
}

ShExpansion inverse_rotate(const Frame& frame, const ShExpansion& f) {
  auto d = wigner_d_complex(f.l_max, frame.tau_arg());
  const double pk = frame.phi_k();
  ShExpansion out(f.l_max);
  for (int l = 0; l <= f.l_max; ++l)
    for (int mp = -l; mp <= l; ++mp) {
      cplx s = 0.0;
      for (int m = -l; m <= l; ++m) s += f(l, m) * std::polar(1.0, m * pk) * d[l](m, mp);
      out.at(l, mp) = s;
    }
  return out;
}

cplx rotated_mu(const Frame& frame, double mu, double phi) {
  double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  return cplx(frame.kz() * mu, -frame.tau_arg() * st * std::cos(phi - frame.phi_q));
}

cplx inverse_rotated_mu(const Frame& frame, double mu, double phi) {
  double st = std::sqrt(std::max(0.0, 1.0 - mu * mu));
  return cplx(frame.kz() * mu, -std::abs(frame.tau_arg()) * st * std::cos(phi));
}

cplx evaluate(const ShExpansion& f, double mu, double phi) {
  cplx s = 0.0;
  for (int l = 0; l <= f.l_max; ++l)
    for (int m = -l; m <= l; ++m) {
      cplx c = f(l, m);
      if (c != 0.0) s += c * sph_harm(l, m, mu, phi);
    }
  return s;
}

ShExpansion sh_product(const ShExpansion& a, const ShExpansion& b) {
  // Y_{l1m1} Y_{l2m2} = sum_l sqrt((2l1+1)(2l2+1)/(4pi(2l+1))) C^{l0}_{l10l20} C^{lm}_{l1m1l2m2} Y_lm
  ShExpansion out(a.l_max + b.l_max);
  for (int l1 = 0; l1 <= a.l_max; ++l1)
    for (int m1 = -l1; m1 <= l1; ++m1) {
      cplx fa = a(l1, m1);
      if (fa == 0.0) continue;
      for (int l2 = 0; l2 <= b.l_max; ++l2)
        for (int m2 = -l2; m2 <= l2; ++m2) {
          cplx fb = b(l2, m2);
          if (fb == 0.0) continue;
          for (int l = std::abs(l1 - l2); l <= l1 + l2; ++l) {
            if (std::abs(m1 + m2) > l) continue;
            double c0 = clebsch_gordan(l1, 0, l2, 0, l, 0);
            if (c0 == 0.0) continue;
            double k = std::sqrt((2.0 * l1 + 1.0) * (2.0 * l2 + 1.0) / (4.0 * std::numbers::pi * (2.0 * l + 1.0)));
            out.at(l, m1 + m2) += fa * fb * k * c0 * clebsch_gordan(l1, m1, l2, m2, l, m1 + m2);
          }
        }
    }
  return out;
}

}  // namespace rrf
