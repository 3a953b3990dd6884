#include "rrf/mrrf.hpp"

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <functional>
#include <numbers>

#include "rrf/quadrature.hpp"

namespace rrf {

namespace {

constexpr double pi = std::numbers::pi;

double parity(int n) { return (n % 2 == 0) ? 1.0 : -1.0; }

std::vector<double> off_diagonal(const std::vector<double>& sigma, int M, int l_max) {
  std::vector<double> off;
  for (int l = M + 1; l <= l_max; ++l)
    off.push_back(std::sqrt(double(l * l - M * M) / ((4.0 * l * l - 1.0) * sigma[l - 1] * sigma[l])));
  return off;
}

std::vector<double> sigma_table(const Medium& medium, int l_max) {
  std::vector<double> s(static_cast<std::size_t>(l_max) + 1);
  for (int l = 0; l <= l_max; ++l) {
    s[l] = medium.h(l) / (2.0 * l + 1.0);
    if (!(s[l] > 0.0)) throw ConfigError(fmt::format("mrrf: sigma_{} = {} is not positive", l, s[l]));
  }
  return s;
}

// Y_lm(z_hat) is nonzero only for m = 0
double y_l0_pole(int l) { return std::sqrt((2.0 * l + 1.0) / (4.0 * pi)); }

struct Basis3 {
  Vec3 e1, e2, e3;
};

// orthonormal frame with e3 along r
Basis3 frame_along(const Vec3& r) {
  double R = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
  Vec3 e3{r[0] / R, r[1] / R, r[2] / R};
  Vec3 a = std::abs(e3[2]) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
  Vec3 e1{a[1] * e3[2] - a[2] * e3[1], a[2] * e3[0] - a[0] * e3[2], a[0] * e3[1] - a[1] * e3[0]};
  double n1 = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
  for (auto& v : e1) v /= n1;
  Vec3 e2{e3[1] * e1[2] - e3[2] * e1[1], e3[2] * e1[0] - e3[0] * e1[2], e3[0] * e1[1] - e3[1] * e1[0]};
  return {e1, e2, e3};
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

std::pair<double, double> direction_angles(const Basis3& f, const Vec3& s) {
  double x = dot(f.e1, s), y = dot(f.e2, s), z = dot(f.e3, s);
  double n = std::sqrt(x * x + y * y + z * z);
  return {std::clamp(z / n, -1.0, 1.0), std::atan2(y, x)};
}

// chi^{lm}_{l'm}(R z_hat) for all l, l', m with the k_L values shared
class ChiTable {
 public:
  ChiTable(const ModeBasis& b, double R) : b_(b), L_(b.l_max) {
    if (!(R > 0.0)) throw ConfigError("mrrf: chi needs R > 0");
    const double x = b.mu_t * R;
    // S^M_{l l'}(L) = sum_{lambda>0} psi_l psi_l' lambda^{-3} k_L(x/lambda)
    S_.assign(static_cast<std::size_t>((L_ + 1) * (L_ + 1) * (L_ + 1) * (2 * L_ + 1)), 0.0);
    for (int M = 0; M <= L_; ++M) {
      const auto& blk = b.block(M);
      for (std::size_t n = 0; n < blk.lambda.size(); ++n) {
        const double lam = blk.lambda[n];
        auto k = mod_sph_k_all(2 * L_, x / lam);
        const double w = 1.0 / (lam * lam * lam);
        for (int l = M; l <= L_; ++l)
          for (int lp = M; lp <= L_; ++lp) {
            const double pp = blk.psi[n][l - M] * blk.psi[n][lp - M] * w;
            for (int Lk = std::abs(l - lp); Lk <= l + lp; Lk += 2) S(M, l, lp, Lk) += pp * k[Lk];
          }
      }
    }
  }

  double chi(int l, int m, int lp, int mp) const {
    if (m != mp || std::abs(m) > l || std::abs(m) > lp) return 0.0;
    const double mt = b_.mu_t;
    double sum = 0.0;
    const int mm = std::min(l, lp);
    for (int M = -mm; M <= mm; ++M)
      for (int j = 0; j <= mm; ++j) {
        const int Lk = std::abs(l - lp) + 2 * j;
        const double c1 = clebsch_gordan(l, m, lp, -m, Lk, 0);
        if (c1 == 0.0) continue;
        const double c2 = clebsch_gordan(l, M, lp, -M, Lk, 0);
        if (c2 == 0.0) continue;
        sum += parity(std::abs(m - M)) * c1 * c2 * S(std::abs(M), l, lp, Lk);
      }
    return mt * mt * mt * sum / (2.0 * pi * mt * std::sqrt(b_.sigma[l] * b_.sigma[lp]));
  }

 private:
  double& S(int M, int l, int lp, int Lk) {
    return S_[static_cast<std::size_t>(((M * (L_ + 1) + l) * (L_ + 1) + lp) * (2 * L_ + 1) + Lk)];
  }
  double S(int M, int l, int lp, int Lk) const {
    return S_[static_cast<std::size_t>(((M * (L_ + 1) + l) * (L_ + 1) + lp) * (2 * L_ + 1) + Lk)];
  }
  const ModeBasis& b_;
  int L_;
  std::vector<double> S_;
};

// rows (l', m') with P_{l'}^{m'} odd in mu
std::vector<std::pair<int, int>> marshak_rows(int l_max) {
  std::vector<std::pair<int, int>> rows;
  for (int mp = -l_max; mp <= l_max; ++mp)
    for (int lp = std::abs(mp); lp <= l_max; ++lp)
      if ((lp + std::abs(mp)) % 2 == 1) rows.emplace_back(lp, mp);
  return rows;
}

std::vector<std::pair<int, int>> mode_labels(const ModeBasis& b) {
  std::vector<std::pair<int, int>> labels;
  for (int M = -b.l_max; M <= b.l_max; ++M)
    for (int n = 0; n < static_cast<int>(b.block(M).lambda.size()); ++n) labels.emplace_back(M, n);
  return labels;
}

// sum_l H^0_{l'l} Y_l0(z_hat): half-range projection of the truncated delta(s - z_hat)
double source_row(int lp, int l_max) {
  double s = 0.0;
  for (int l = 0; l <= l_max; ++l) s += half_range_overlap(lp, l, 0) * y_l0_pole(l);
  return s;
}

double kz(double lam, double q) { return std::sqrt(1.0 + lam * lam * q * q); }

// half-range projections of one harmonic vector onto the Marshak rows; upper = mu > 0
Eigen::VectorXcd project(const ShExpansion& c, const std::vector<std::pair<int, int>>& rows, bool upper) {
  Eigen::VectorXcd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto [lp, mp] = rows[r];
    cplx s = 0.0;
    for (int l = std::abs(mp); l <= c.l_max; ++l) {
      double h = half_range_overlap(lp, l, mp);
      if (h == 0.0) continue;
      s += (upper ? 1.0 : parity(l + lp)) * h * c(l, mp);
    }
    out[static_cast<Eigen::Index>(r)] = s;
  }
  return out;
}

// moves the eigenvalues picked by keep to the leading block of a triangular Schur form
template <class Mat>
void reorder_schur(Mat& T, Mat& U, const std::function<bool(double)>& keep) {
  using Scalar = typename Mat::Scalar;
  const Eigen::Index n = T.rows();
  Eigen::Index p = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!keep(std::real(T(k, k)))) continue;
    for (Eigen::Index j = k; j > p; --j) {
      Eigen::JacobiRotation<Scalar> g;
      g.makeGivens(T(j - 1, j), T(j, j) - T(j - 1, j - 1));
      T.applyOnTheLeft(j - 1, j, g.adjoint());
      T.applyOnTheRight(j - 1, j, g);
      U.applyOnTheRight(j - 1, j, g);
      T(j, j - 1) = Scalar(0);
    }
    ++p;
  }
}

}  // namespace

namespace detail {
// c(z) = E (Wp e^{-Ap z} a + Wm e^{Am (L - z)} b)
struct SlabSubspace {
  Eigen::MatrixXcd E, Wp, Ap, Wm, Am;
  Eigen::VectorXcd a, b;
  double width = 0.0;

  Eigen::VectorXcd reduced(double z) const {
    Eigen::VectorXcd r = Wp * ((-Ap * z).exp() * a);
    if (b.size() > 0) r += Wm * ((Am * (width - z)).exp() * b);
    return r;
  }
  Eigen::VectorXcd coefficients(double z) const { return E * reduced(z); }
  double c00(double z) const { return (E.row(0) * reduced(z))(0).real(); }
};
}  // namespace detail

namespace {

// The beam and q along x are symmetric under y -> -y, and c_lm -> i^m c_lm makes the
// generator real, so the solve runs on the real coefficients d with c_{l,+-m} = i^{+-m} d_lm.
struct Reduced {
  Eigen::MatrixXcd lift;  // full harmonic coefficients from the even-sector ones
  Eigen::MatrixXd E;
  Eigen::MatrixXcd Wp, Ap, Wm, Am;  // real unless the Schur form needed complex arithmetic
  std::vector<std::pair<int, int>> rows;  // Marshak rows with m' >= 0
  Eigen::MatrixXd P0, PL;                 // row projections acting on the even sector
};

Eigen::MatrixXcd even_lift(int L) {
  const Eigen::Index n = (L + 1) * (L + 1);
  std::vector<std::pair<int, int>> cols;
  for (int l = 0; l <= L; ++l)
    for (int m = 0; m <= l; ++m) cols.emplace_back(l, m);
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(n, static_cast<Eigen::Index>(cols.size()));
  const cplx I(0.0, 1.0);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    auto [l, m] = cols[j];
    const Eigen::Index jj = static_cast<Eigen::Index>(j);
    if (m == 0) {
      P(ShExpansion::index(l, 0), jj) = 1.0;
    } else {
      P(ShExpansion::index(l, m), jj) = std::pow(I, m) / std::sqrt(2.0);
      P(ShExpansion::index(l, -m), jj) = std::pow(I, -m) / std::sqrt(2.0);
    }
  }
  return P;
}

Eigen::MatrixXd real_part_checked(const Eigen::MatrixXcd& M, const char* what) {
  const double scale = std::max(M.cwiseAbs().maxCoeff(), 1.0);
  if (M.imag().cwiseAbs().maxCoeff() > 1e-12 * scale) throw NumericError(fmt::format("mrrf: {} is not real", what));
  return M.real();
}

Eigen::MatrixXcd projector(const std::vector<std::pair<int, int>>& rows, int l_max, bool upper);

// Rz c' + (Sigma + i q Rx) c = 0 reduced to r' = -A r on the range of Rz
Reduced reduce_transport(const ModeBasis& basis, double q) {
  const int L = basis.l_max;
  Reduced red;
  red.lift = even_lift(L);
  Eigen::MatrixXcd Tf = cplx(0.0, q) * sx_matrix(L).cast<cplx>();
  for (int l = 0; l <= L; ++l)
    for (int m = -l; m <= l; ++m) Tf(ShExpansion::index(l, m), ShExpansion::index(l, m)) += basis.sigma[l];
  const Eigen::MatrixXd T = real_part_checked(red.lift.adjoint() * Tf * red.lift, "transport operator");
  const Eigen::MatrixXd Rz =
      real_part_checked(red.lift.adjoint() * mu_matrix(L).cast<cplx>() * red.lift, "mu operator");
  const Eigen::Index n = T.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Rz);
  std::vector<Eigen::Index> rng, nul;
  for (Eigen::Index i = 0; i < n; ++i) (std::abs(es.eigenvalues()[i]) > 1e-10 ? rng : nul).push_back(i);
  const Eigen::Index m = static_cast<Eigen::Index>(rng.size()), k = static_cast<Eigen::Index>(nul.size());
  Eigen::MatrixXd Vr(n, m), Vn(n, k);
  Eigen::VectorXd d(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    Vr.col(i) = es.eigenvectors().col(rng[i]);
    d[i] = es.eigenvalues()[rng[i]];
  }
  for (Eigen::Index i = 0; i < k; ++i) Vn.col(i) = es.eigenvectors().col(nul[i]);
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(k, m);
  if (k > 0) K = -(Vn.transpose() * T * Vn).partialPivLu().solve(Vn.transpose() * T * Vr);
  red.E = Vr + Vn * K;
  Eigen::MatrixXd A = d.cwiseInverse().asDiagonal() * (Vr.transpose() * T * red.E);
  if (m % 2 != 0) throw NumericError("mrrf: odd transport rank");
  const Eigen::Index h = m / 2;
  auto split = [&](auto T0, auto U0) {
    Eigen::Index npos = 0;
    for (Eigen::Index i = 0; i < m; ++i) npos += std::real(T0(i, i)) > 0.0;
    if (npos != h)
      throw NumericError(fmt::format("mrrf: {} decaying directions for {} rows at q = {}", npos, h, q));
    for (int pass = 0; pass < 2; ++pass) {
      auto Ts = T0;
      auto Us = U0;
      reorder_schur(Ts, Us, [pass](double e) { return pass == 0 ? e > 0.0 : e < 0.0; });
      (pass == 0 ? red.Wp : red.Wm) = Us.leftCols(h).template cast<cplx>();
      (pass == 0 ? red.Ap : red.Am) =
          Ts.topLeftCorner(h, h).template triangularView<Eigen::Upper>().toDenseMatrix().template cast<cplx>();
    }
  };
  Eigen::RealSchur<Eigen::MatrixXd> rs(A);
  if (rs.info() != Eigen::Success) throw NumericError(fmt::format("mrrf: Schur form failed at q = {}", q));
  bool triangular = true;
  for (Eigen::Index i = 0; i + 1 < m; ++i) triangular = triangular && rs.matrixT()(i + 1, i) == 0.0;
  if (triangular) {
    split(Eigen::MatrixXd(rs.matrixT()), Eigen::MatrixXd(rs.matrixU()));
  } else {
    // clustered decay rates can split into nearly real complex pairs
    Eigen::ComplexSchur<Eigen::MatrixXcd> cs(A.cast<cplx>());
    if (cs.info() != Eigen::Success) throw NumericError(fmt::format("mrrf: Schur form failed at q = {}", q));
    split(Eigen::MatrixXcd(cs.matrixT()), Eigen::MatrixXcd(cs.matrixU()));
  }
  for (const auto& r : marshak_rows(L))
    if (r.second >= 0) red.rows.push_back(r);
  if (static_cast<Eigen::Index>(red.rows.size()) != h)
    throw NumericError(fmt::format("mrrf: {} boundary rows for {} decaying directions", red.rows.size(), h));
  // row (l', m') of the projection carries i^{m'}; dividing it out leaves a real system
  Eigen::VectorXcd unphase(h);
  for (Eigen::Index r = 0; r < h; ++r) unphase[r] = std::pow(cplx(0.0, 1.0), -red.rows[static_cast<std::size_t>(r)].second);
  red.P0 = real_part_checked(unphase.asDiagonal() * projector(red.rows, L, true) * red.lift, "boundary rows");
  red.PL = real_part_checked(unphase.asDiagonal() * projector(red.rows, L, false) * red.lift, "boundary rows");
  return red;
}

// half-range projection matrix onto the Marshak rows; upper = mu > 0
Eigen::MatrixXcd projector(const std::vector<std::pair<int, int>>& rows, int l_max, bool upper) {
  Eigen::MatrixXcd P = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows.size()), (l_max + 1) * (l_max + 1));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto [lp, mp] = rows[r];
    for (int l = std::abs(mp); l <= l_max; ++l)
      P(static_cast<Eigen::Index>(r), ShExpansion::index(l, mp)) =
          (upper ? 1.0 : parity(l + lp)) * half_range_overlap(lp, l, mp);
  }
  return P;
}

Eigen::VectorXcd source_vector(const std::vector<std::pair<int, int>>& rows, int l_max) {
  Eigen::VectorXcd s = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].second == 0) s[static_cast<Eigen::Index>(r)] = source_row(rows[r].first, l_max);
  return s;
}

double hemispheric_weight(int l) {
  static const Rule gl = gauss_legendre(64, 0.0, 1.0);
  double w = 0.0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) w += gl.w[i] * gl.x[i] * legendre_p(l, 0, -gl.x[i]);
  return 2.0 * pi * y_l0_pole(l) * w;
}

}  // namespace

double ModeBasis::psi(int M, int n, int l, int sign) const {
  const auto& blk = block(M);
  const int am = std::abs(M);
  double v = blk.psi.at(static_cast<std::size_t>(n)).at(static_cast<std::size_t>(l - am));
  return sign > 0 ? v : parity(l - am) * v;
}

int ModeBasis::mode_count() const {
  int c = 0;
  for (int M = -l_max; M <= l_max; ++M) c += static_cast<int>(block(M).lambda.size());
  return c;
}

ModeBasis build_modes(const Medium& medium, int l_max) {
  if (l_max < 1) throw ConfigError("mrrf: l_max must be >= 1");
  ModeBasis b;
  b.mu_t = medium.mu_t();
  b.albedo = medium.albedo();
  b.l_max = l_max;
  b.sigma = sigma_table(medium, l_max);
  for (int M = 0; M <= l_max; ++M) {
    MrrfBlock blk;
    blk.M = M;
    const int n = l_max - M + 1;
    if (n == 1) {
      blk.zero_modes = 1;
      b.blocks.push_back(std::move(blk));
      continue;
    }
    auto off = off_diagonal(b.sigma, M, l_max);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    Eigen::Map<Eigen::VectorXd> e(off.data(), n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericError(fmt::format("mrrf: B({}) eigensolver failed", M));
    const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      double lam = es.eigenvalues()[i];
      if (std::abs(lam) <= 1e-12 * scale) {
        ++blk.zero_modes;
        continue;
      }
      if (lam < 0.0) continue;
      std::vector<double> v(static_cast<std::size_t>(n));
      double sg = es.eigenvectors()(0, i) < 0.0 ? -1.0 : 1.0;
      for (int k = 0; k < n; ++k) v[k] = sg * es.eigenvectors()(k, i);
      blk.lambda.push_back(lam);
      blk.psi.push_back(std::move(v));
    }
    b.blocks.push_back(std::move(blk));
  }
  return b;
}

std::pair<std::vector<double>, std::vector<double>> b_matrix(const Medium& medium, int M, int l_max) {
  const int am = std::abs(M);
  if (l_max < am + 1) throw ConfigError("mrrf: b_matrix needs l_max > |M|");
  auto sigma = sigma_table(medium, l_max);
  auto off = off_diagonal(sigma, am, l_max);
  for (auto& v : off) v /= medium.mu_t();
  return {std::vector<double>(static_cast<std::size_t>(l_max - am + 1), 0.0), off};
}

double coefficient_link(const Medium& medium, int M, double lambda, int l) {
  auto g = chandra_g(medium, M, lambda, l);
  return parity(std::abs(M)) * std::sqrt((2.0 * l + 1.0) * pi) * g.value(l);
}

double chi_infinite(const ModeBasis& basis, double R, int l, int m, int lp, int mp) {
  if (l < 0 || lp < 0 || l > basis.l_max || lp > basis.l_max) throw ConfigError("mrrf: chi degree out of range");
  return ChiTable(basis, R).chi(l, m, lp, mp);
}

double chi_ballistic(const ModeBasis& basis, double R, int l, int m, int lp, int mp) {
  if (!(R > 0.0)) throw ConfigError("mrrf: chi needs R > 0");
  if (m != 0 || mp != 0) return 0.0;
  return std::sqrt((2.0 * l + 1.0) * (2.0 * lp + 1.0)) / (4.0 * pi * R * R) * std::exp(-basis.mu_t * R);
}

double greens_point(const ModeBasis& basis, const Vec3& r, const Vec3& s, const Vec3& s0, bool subtract_ballistic) {
  const double R = std::sqrt(dot(r, r));
  if (!(R > 0.0)) throw ConfigError("mrrf: greens_point needs r != r0");
  const int L = basis.l_max;
  ChiTable chi(basis, R);
  Basis3 f = frame_along(r);
  auto [mu, phi] = direction_angles(f, s);
  auto [mu0, phi0] = direction_angles(f, s0);
  cplx G = 0.0;
  for (int m = -L; m <= L; ++m)
    for (int l = std::abs(m); l <= L; ++l) {
      cplx yl = sph_harm(l, m, mu, phi);
      for (int lp = std::abs(m); lp <= L; ++lp) G += yl * chi.chi(l, m, lp, m) * std::conj(sph_harm(lp, m, mu0, phi0));
    }
  double g = G.real();
  if (subtract_ballistic) {
    // truncated delta(s - s0) delta(R_hat - s0) e^{-mu_t R}/R^2
    double cs = dot(s, s0) / std::sqrt(dot(s, s) * dot(s0, s0));
    double cr = dot(r, s0) / (R * std::sqrt(dot(s0, s0)));
    double a = 0.0, c = 0.0;
    for (int l = 0; l <= L; ++l) {
      a += (2.0 * l + 1.0) / (4.0 * pi) * legendre_p(l, 0, std::clamp(cs, -1.0, 1.0));
      c += (2.0 * l + 1.0) / (4.0 * pi) * legendre_p(l, 0, std::clamp(cr, -1.0, 1.0));
    }
    g -= a * c * std::exp(-basis.mu_t * R) / (R * R);
  }
  return g;
}

double energy_density_infinite(const ModeBasis& basis, double rho, double z, bool subtract_ballistic) {
  const double R = std::hypot(rho, z);
  if (!(R > 0.0)) throw ConfigError("mrrf: energy density is singular at the source");
  ChiTable chi(basis, R);
  const double c = z / R;
  double u = 0.0, ub = 0.0;
  for (int lp = 0; lp <= basis.l_max; ++lp) {
    double p = legendre_p(lp, 0, c);
    u += std::sqrt(2.0 * lp + 1.0) * p * chi.chi(0, 0, lp, 0);
    ub += (2.0 * lp + 1.0) / (4.0 * pi) * p;
  }
  if (subtract_ballistic) u -= ub * std::exp(-basis.mu_t * R) / (R * R);
  return u;
}

ShExpansion mode_vector(const ModeBasis& basis, int M, int n, int sign, double q, double phi_q) {
  const int am = std::abs(M);
  ShExpansion f(basis.l_max);
  for (int l = am; l <= basis.l_max; ++l) f.at(l, M) = basis.psi(M, n, l, sign) / std::sqrt(basis.sigma[l]);
  const double lam = sign * basis.block(M).lambda.at(static_cast<std::size_t>(n));
  return rotate(make_frame(lam, q, phi_q), f);
}

double half_range_overlap(int l, int lp, int m) {
  const int am = std::abs(m);
  if (l < am || lp < am) return 0.0;
  if ((l + lp) % 2 == 0) return l == lp ? 0.5 : 0.0;
  static const Rule gl = gauss_legendre(64, 0.0, 1.0);
  double s = 0.0;
  for (std::size_t i = 0; i < gl.x.size(); ++i)
    s += gl.w[i] * sph_harm(l, am, gl.x[i], 0.0).real() * sph_harm(lp, am, gl.x[i], 0.0).real();
  return 2.0 * pi * s;
}

Eigen::MatrixXd mu_matrix(int l_max) {
  const Eigen::Index n = (l_max + 1) * (l_max + 1);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  for (int l = 0; l < l_max; ++l)
    for (int m = -l; m <= l; ++m) {
      const double a = std::sqrt(((l + 1.0) * (l + 1.0) - m * m) / (4.0 * (l + 1.0) * (l + 1.0) - 1.0));
      R(ShExpansion::index(l + 1, m), ShExpansion::index(l, m)) = a;
      R(ShExpansion::index(l, m), ShExpansion::index(l + 1, m)) = a;
    }
  return R;
}

Eigen::MatrixXd sx_matrix(int l_max) {
  const Eigen::Index n = (l_max + 1) * (l_max + 1);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(n, n);
  // sin(theta) e^{+-i phi} Y_lm raise and lower l by one; s_x is their mean
  for (int l = 0; l < l_max; ++l)
    for (int m = -l; m <= l; ++m) {
      const double up = -std::sqrt((l + m + 1.0) * (l + m + 2.0) / ((2.0 * l + 1.0) * (2.0 * l + 3.0)));
      const double dn = std::sqrt((l - m + 1.0) * (l - m + 2.0) / ((2.0 * l + 1.0) * (2.0 * l + 3.0)));
      R(ShExpansion::index(l + 1, m + 1), ShExpansion::index(l, m)) += 0.5 * up;
      R(ShExpansion::index(l + 1, m - 1), ShExpansion::index(l, m)) += 0.5 * dn;
    }
  // the l -> l-1 entries follow from hermiticity
  Eigen::MatrixXd S = R + R.transpose();
  return S;
}

SlabSolution solve_slab_subspace(const ModeBasis& basis, const SlabProblem& problem, double q) {
  if (!(problem.width > 0.0)) throw ConfigError("mrrf: slab width must be positive");
  if (q < 0.0) throw ConfigError("mrrf: q must be >= 0");
  if (problem.l_max != basis.l_max) throw ConfigError("mrrf: slab l_max differs from the mode basis");
  Reduced red = reduce_transport(basis, q);
  const Eigen::Index h = red.Wp.cols();
  const double L = problem.width;
  Eigen::MatrixXcd P0 = (red.P0 * red.E).cast<cplx>(), PL = (red.PL * red.E).cast<cplx>();
  Eigen::MatrixXcd A(2 * h, 2 * h);
  A.topLeftCorner(h, h) = P0 * red.Wp;
  A.topRightCorner(h, h) = P0 * red.Wm * (red.Am * L).exp();
  A.bottomLeftCorner(h, h) = PL * red.Wp * (-red.Ap * L).exp();
  A.bottomRightCorner(h, h) = PL * red.Wm;
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(2 * h);
  rhs.head(h) = source_vector(red.rows, basis.l_max);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  const double rc = lu.rcond();
  SlabSolution sol;
  sol.q = q;
  sol.method = SlabMethod::subspace;
  sol.rows = static_cast<int>(2 * h);
  sol.condition = rc > 0.0 ? 1.0 / rc : INFINITY;
  if (!(rc > 1e-15))
    throw NumericError(fmt::format("mrrf: subspace boundary matrix is singular at q = {} (condition {:.3e})", q,
                                   sol.condition));
  Eigen::VectorXcd x = lu.solve(rhs);
  auto st = std::make_shared<detail::SlabSubspace>();
  st->E = red.lift * red.E.cast<cplx>();
  st->Wp = std::move(red.Wp);
  st->Ap = std::move(red.Ap);
  st->Wm = std::move(red.Wm);
  st->Am = std::move(red.Am);
  st->a = x.head(h);
  st->b = x.tail(h);
  st->width = L;
  sol.subspace = std::move(st);
  return sol;
}

SlabSolution solve_slab(const ModeBasis& basis, const SlabProblem& problem, double q) {
  if (!(problem.width > 0.0)) throw ConfigError("mrrf: slab width must be positive");
  if (q < 0.0) throw ConfigError("mrrf: q must be >= 0");
  if (problem.l_max != basis.l_max) throw ConfigError("mrrf: slab l_max differs from the mode basis");
  const auto rows = marshak_rows(basis.l_max);
  SlabSolution sol;
  sol.q = q;
  sol.labels = mode_labels(basis);
  const Eigen::Index nr = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index nc = static_cast<Eigen::Index>(sol.labels.size());
  if (nr != nc) throw NumericError(fmt::format("mrrf: {} boundary rows for {} modes", nr, nc));
  sol.rows = static_cast<int>(2 * nr);

  Eigen::MatrixXcd A(2 * nr, 2 * nc);
  for (Eigen::Index j = 0; j < nc; ++j) {
    auto [M, n] = sol.labels[static_cast<std::size_t>(j)];
    const double lam = basis.block(M).lambda[static_cast<std::size_t>(n)];
    const double damp = std::exp(-kz(lam, q) * problem.width / lam);
    auto vp = mode_vector(basis, M, n, +1, q);
    auto vm = mode_vector(basis, M, n, -1, q);
    auto p0 = project(vp, rows, true), pL = project(vp, rows, false);
    auto m0 = project(vm, rows, true), mL = project(vm, rows, false);
    A.block(0, j, nr, 1) = p0;
    A.block(nr, j, nr, 1) = damp * pL;
    A.block(0, nc + j, nr, 1) = damp * m0;
    A.block(nr, nc + j, nr, 1) = mL;
  }
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(2 * nr);
  for (Eigen::Index r = 0; r < nr; ++r) {
    auto [lp, mp] = rows[static_cast<std::size_t>(r)];
    if (mp == 0) rhs[r] = source_row(lp, basis.l_max);
  }
  // column equilibration keeps the condition estimate meaningful at large q
  Eigen::VectorXd colscale(2 * nc);
  for (Eigen::Index j = 0; j < 2 * nc; ++j) {
    double s = A.col(j).cwiseAbs().maxCoeff();
    colscale[j] = s > 0.0 ? 1.0 / s : 1.0;
    A.col(j) *= colscale[j];
  }
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  double rc = lu.rcond();
  sol.condition = rc > 0.0 ? 1.0 / rc : INFINITY;
  if (!(rc > 1e-15))
    throw NumericError(fmt::format("mrrf: slab boundary matrix is singular at q = {} (condition {:.3e})", q,
                                   sol.condition));
  Eigen::VectorXcd x = lu.solve(rhs);
  sol.f_plus.resize(static_cast<std::size_t>(nc));
  sol.f_minus.resize(static_cast<std::size_t>(nc));
  for (Eigen::Index j = 0; j < nc; ++j) {
    sol.f_plus[static_cast<std::size_t>(j)] = x[j] * colscale[j];
    sol.f_minus[static_cast<std::size_t>(j)] = x[nc + j] * colscale[nc + j];
  }
  return sol;
}

ShExpansion slab_fourier_intensity(const ModeBasis& basis, const SlabProblem& problem, const SlabSolution& sol,
                                   double z) {
  if (z < 0.0 || z > problem.width) throw ConfigError("mrrf: depth outside the slab");
  ShExpansion c(basis.l_max);
  if (sol.method == SlabMethod::subspace) {
    Eigen::VectorXcd v = sol.subspace->coefficients(z);
    for (std::size_t i = 0; i < c.c.size(); ++i) c.c[i] = v[static_cast<Eigen::Index>(i)];
    return c;
  }
  for (std::size_t j = 0; j < sol.labels.size(); ++j) {
    auto [M, n] = sol.labels[j];
    const double lam = basis.block(M).lambda[static_cast<std::size_t>(n)];
    const double k = kz(lam, sol.q);
    const cplx a = sol.f_plus[j] * std::exp(-k * z / lam);
    const cplx b = sol.f_minus[j] * std::exp(-k * (problem.width - z) / lam);
    auto vp = mode_vector(basis, M, n, +1, sol.q);
    auto vm = mode_vector(basis, M, n, -1, sol.q);
    for (std::size_t i = 0; i < c.c.size(); ++i) c.c[i] += a * vp.c[i] + b * vm.c[i];
  }
  return c;
}

SlabSolver::SlabSolver(const Medium& medium, SlabProblem problem)
    : basis_(build_modes(medium, problem.l_max)), problem_(problem) {
  if (!(problem.width > 0.0)) throw ConfigError("mrrf: slab width must be positive");
}

std::shared_ptr<const SlabSolution> SlabSolver::at(double q) const {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(q);
    if (it != cache_.end()) return it->second;
  }
  std::shared_ptr<const SlabSolution> sol;
  double limit;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    limit = mode_q_limit_;
  }
  // the rotated modes only lose conditioning as q grows
  if (q < limit) {
    try {
      auto s = solve_slab(basis_, problem_, q);
      if (s.condition <= slab_mode_condition_limit) sol = std::make_shared<const SlabSolution>(std::move(s));
    } catch (const NumericError&) {
    }
    if (!sol) {
      std::lock_guard<std::mutex> lock(mutex_);
      mode_q_limit_ = std::min(mode_q_limit_, q);
    }
  }
  if (!sol) sol = std::make_shared<const SlabSolution>(solve_slab_subspace(basis_, problem_, q));
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(q, sol).first->second;
}

double SlabSolver::fourier_density(double q, double z) const {
  // every mode carries at most e^{-q min(z, L - z)}
  if (q * std::min(z, problem_.width - z) > 745.0) return 0.0;
  auto sol = at(q);
  if (sol->method == SlabMethod::subspace) return std::sqrt(4.0 * pi) * sol->subspace->c00(z);
  // only the m = 0 column feeds c_00, so rebuild just that coefficient
  cplx c00 = 0.0;
  for (std::size_t j = 0; j < sol->labels.size(); ++j) {
    auto [M, n] = sol->labels[j];
    const double lam = basis_.block(M).lambda[static_cast<std::size_t>(n)];
    const double k = kz(lam, q);
    const cplx a = sol->f_plus[j] * std::exp(-k * z / lam);
    const cplx b = sol->f_minus[j] * std::exp(-k * (problem_.width - z) / lam);
    // Y_00 is rotation invariant: only the l = 0 input survives
    if (M != 0) continue;
    const double f0 = basis_.psi(0, n, 0, 1) / std::sqrt(basis_.sigma[0]);
    c00 += (a + b) * f0;
  }
  return std::sqrt(4.0 * pi) * c00.real();
}

double SlabSolver::energy_density(double rho, double z) const {
  const double mt = basis_.mu_t;
  const double zz = z * mt, rr = rho * mt;
  if (zz < 0.0 || zz > problem_.width) throw ConfigError("mrrf: depth outside the slab");
  if (!(rr > 0.0)) throw ConfigError("mrrf: slab density needs rho > 0");
  HankelOptions opt;
  opt.rtol = 1e-7;
  opt.atol = 1e-14;
  opt.q_scale = 1.0 / std::max(std::min(zz, problem_.width - zz), 1e-3);
  auto res = hankel_integral([&](double q) { return fourier_density(q, zz); }, 0, rr, opt);
  if (!res.converged)
    throw NumericError(fmt::format("mrrf: slab Hankel integral did not converge at rho = {}, z = {}", rho, z));
  return mt * mt * res.value / (2.0 * pi);
}

std::size_t SlabSolver::cached() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return cache_.size();
}

double SlabSolver::worst_condition() const {
  std::lock_guard<std::mutex> lock(mutex_);
  double w = 0.0;
  for (const auto& [q, s] : cache_) w = std::max(w, s->condition);
  return w;
}

double slab_energy_density(const Medium& medium, const SlabProblem& problem, double rho, double z) {
  return SlabSolver(medium, problem).energy_density(rho, z);
}

double half_space_flux(const ModeBasis& basis, double q0) {
  if (q0 < 0.0) throw ConfigError("mrrf: q0 must be >= 0");
  const auto rows = marshak_rows(basis.l_max);
  const auto labels = mode_labels(basis);
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  if (static_cast<std::size_t>(n) != labels.size())
    throw NumericError(fmt::format("mrrf: {} boundary rows for {} modes", n, labels.size()));
  Eigen::MatrixXcd A(n, n);
  std::vector<ShExpansion> modes;
  for (Eigen::Index j = 0; j < n; ++j) {
    auto [M, k] = labels[static_cast<std::size_t>(j)];
    modes.push_back(mode_vector(basis, M, k, +1, q0));
    A.col(j) = project(modes.back(), rows, true);
  }
  Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
  for (Eigen::Index r = 0; r < n; ++r)
    if (rows[static_cast<std::size_t>(r)].second == 0) rhs[r] = source_row(rows[static_cast<std::size_t>(r)].first, basis.l_max);
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  if (!(lu.rcond() > 1e-15)) throw NumericError("mrrf: half-space boundary matrix is singular");
  Eigen::VectorXcd f = lu.solve(rhs);
  // J_+ = int_{mu<0} |mu| I ds picks the m = 0 coefficients
  cplx J = 0.0;
  for (int l = 0; l <= basis.l_max; ++l) {
    cplx c = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) c += f[j] * modes[static_cast<std::size_t>(j)](l, 0);
    J += c * hemispheric_weight(l);
  }
  return J.real();
}

double half_space_flux_subspace(const ModeBasis& basis, double q0) {
  if (q0 < 0.0) throw ConfigError("mrrf: q0 must be >= 0");
  Reduced red = reduce_transport(basis, q0);
  Eigen::MatrixXcd A = (red.P0 * red.E).cast<cplx>() * red.Wp;
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
  if (!(lu.rcond() > 1e-15)) throw NumericError("mrrf: half-space subspace matrix is singular");
  Eigen::VectorXcd r = red.Wp * lu.solve(source_vector(red.rows, basis.l_max));
  Eigen::VectorXcd c = red.lift * (red.E.cast<cplx>() * r);
  cplx J = 0.0;
  for (int l = 0; l <= basis.l_max; ++l) J += c[ShExpansion::index(l, 0)] * hemispheric_weight(l);
  return J.real();
}

}  // namespace rrf
