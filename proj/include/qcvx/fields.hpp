#pragma once

// Periodic special potentials built from plane waves along the four cube
// diagonals, their gradient and flux fields, cell averages of Q(grad u), and
// the boundary-integral bound on subdomains of the unit cell.

#include "qcvx/forms.hpp"
#include "qcvx/parallel.hpp"

#include <boost/math/special_functions/legendre.hpp>

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcvx {

using std::numbers::pi;
using cplx = std::complex<double>;
using CVec3 = Eigen::Matrix<cplx, 3, 1>;

/// v(t) = sum_l cos_l cos(pi l t) + sin_l sin(pi l t), l = 1..L.
class ScalarProfile {
 public:
  ScalarProfile() = default;
  ScalarProfile(std::vector<double> cos_coeffs, std::vector<double> sin_coeffs)
      : cos_(std::move(cos_coeffs)), sin_(std::move(sin_coeffs)) {
    const std::size_t n = std::max(cos_.size(), sin_.size());
    cos_.resize(n, 0.0);
    sin_.resize(n, 0.0);
  }

  static ScalarProfile sine(int l = 1, double amplitude = 1.0) {
    std::vector<double> s(l, 0.0);
    s[l - 1] = amplitude;
    return {std::vector<double>(l, 0.0), s};
  }

  static ScalarProfile random(int modes, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> c(modes), s(modes);
    for (int l = 0; l < modes; ++l) {
      c[l] = g(rng);
      s[l] = g(rng);
    }
    return {c, s};
  }

  int modes() const { return static_cast<int>(cos_.size()); }
  const std::vector<double>& cos_coeffs() const { return cos_; }
  const std::vector<double>& sin_coeffs() const { return sin_; }

  double value(double t) const { return eval(t, 0); }
  double derivative(double t) const { return eval(t, 1); }
  double second_derivative(double t) const { return eval(t, 2); }

 private:
  double eval(double t, int order) const {
    double sum = 0.0;
    for (int i = 0; i < modes(); ++i) {
      const double w = pi * (i + 1);
      const double c = std::cos(w * t), s = std::sin(w * t);
      switch (order) {
        case 0: sum += cos_[i] * c + sin_[i] * s; break;
        case 1: sum += w * (-cos_[i] * s + sin_[i] * c); break;
        default: sum += -w * w * (cos_[i] * c + sin_[i] * s); break;
      }
    }
    return sum;
  }

  std::vector<double> cos_, sin_;
};

/// u(x) = sum_m a_m v_m(k_m . x) with k_m = a_m the four diagonal directions
/// (1,1,1), (-1,1,1), (1,-1,1), (1,1,-1).
struct SpecialPotential {
  std::array<ScalarProfile, 4> v;

  static const std::array<Vec3, 4>& directions() {
    static const std::array<Vec3, 4> k = {Vec3(1, 1, 1), Vec3(-1, 1, 1), Vec3(1, -1, 1), Vec3(1, 1, -1)};
    return k;
  }

  static SpecialPotential random(int max_modes, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(1, max_modes);
    SpecialPotential sp;
    for (auto& p : sp.v) p = ScalarProfile::random(pick(rng), rng);
    return sp;
  }

  int max_mode() const {
    int l = 0;
    for (const auto& p : v) l = std::max(l, p.modes());
    return l;
  }

  Vec3 potential(const Vec3& x) const {
    Vec3 u = Vec3::Zero();
    for (int m = 0; m < 4; ++m) u += v[m].value(directions()[m].dot(x)) * directions()[m];
    return u;
  }
};

/// E(x) = sum_m v_m'(k_m . x) k_m (x) k_m.
inline Mat3 special_gradient(const SpecialPotential& sp, const Vec3& x) {
  Mat3 e = Mat3::Zero();
  for (int m = 0; m < 4; ++m) {
    const Vec3& k = SpecialPotential::directions()[m];
    e += sp.v[m].derivative(k.dot(x)) * k * k.transpose();
  }
  return e;
}

inline Mat3 special_flux(const SpecialPotential& sp, const Vec3& x) {
  return flux(extremal_q(), MatrixVar(special_gradient(sp, x)));
}

// ---------------------------------------------------------------------------
// Periodic fields on D = [-1,1]^3: u(x) = sum_k u_hat(k) exp(i pi k.x).

class PeriodicField {
 public:
  explicit PeriodicField(int max_mode = 0) : l_(max_mode), c_(side() * side() * side(), CVec3::Zero()) {
    if (max_mode < 0) throw std::invalid_argument("PeriodicField: negative mode bound");
  }

  int max_mode() const { return l_; }
  int side() const { return 2 * l_ + 1; }

  const CVec3& coeff(int k1, int k2, int k3) const { return c_[index(k1, k2, k3)]; }
  CVec3& coeff(int k1, int k2, int k3) { return c_[index(k1, k2, k3)]; }

  /// Projects onto real fields: u_hat(-k) = conj(u_hat(k)).
  void make_real() {
    std::vector<CVec3> sym(c_.size());
    for (int k1 = -l_; k1 <= l_; ++k1)
      for (int k2 = -l_; k2 <= l_; ++k2)
        for (int k3 = -l_; k3 <= l_; ++k3)
          sym[index(k1, k2, k3)] = 0.5 * (coeff(k1, k2, k3) + coeff(-k1, -k2, -k3).conjugate());
    c_ = std::move(sym);
  }

  static PeriodicField random(int max_mode, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    PeriodicField f(max_mode);
    for (auto& c : f.c_)
      for (int i = 0; i < 3; ++i) c(i) = cplx(g(rng), g(rng));
    f.make_real();
    return f;
  }

  /// v(t) = sum c cos(pi l t) + s sin(pi l t) contributes a (c - i s)/2 at
  /// l k_m and the conjugate at -l k_m.
  static PeriodicField from_special(const SpecialPotential& sp) {
    PeriodicField f(sp.max_mode());
    for (int m = 0; m < 4; ++m) {
      const Vec3& k = SpecialPotential::directions()[m];
      const ScalarProfile& p = sp.v[m];
      for (int l = 1; l <= p.modes(); ++l) {
        const cplx amp(0.5 * p.cos_coeffs()[l - 1], -0.5 * p.sin_coeffs()[l - 1]);
        const int a = static_cast<int>(k(0)) * l, b = static_cast<int>(k(1)) * l, c = static_cast<int>(k(2)) * l;
        f.coeff(a, b, c) += amp * k.cast<cplx>();
        f.coeff(-a, -b, -c) += std::conj(amp) * k.cast<cplx>();
      }
    }
    return f;
  }

  /// grad u(x), row i = d u_i / d x_j.
  Mat3 gradient(const Vec3& x) const {
    Mat3 g = Mat3::Zero();
    for_each_mode([&](int k1, int k2, int k3, const CVec3& c) {
      const Vec3 k(k1, k2, k3);
      const cplx phase = std::exp(cplx(0.0, pi * k.dot(x)));
      const CVec3 v = cplx(0.0, pi) * phase * c;
      g += v.real() * k.transpose();
    });
    return g;
  }

  Vec3 value(const Vec3& x) const {
    Vec3 u = Vec3::Zero();
    for_each_mode([&](int k1, int k2, int k3, const CVec3& c) {
      u += (std::exp(cplx(0.0, pi * Vec3(k1, k2, k3).dot(x))) * c).real();
    });
    return u;
  }

  template <class Fn>
  void for_each_mode(Fn&& fn) const {
    for (int k1 = -l_; k1 <= l_; ++k1)
      for (int k2 = -l_; k2 <= l_; ++k2)
        for (int k3 = -l_; k3 <= l_; ++k3) fn(k1, k2, k3, coeff(k1, k2, k3));
  }

 private:
  std::size_t index(int k1, int k2, int k3) const {
    if (std::abs(k1) > l_ || std::abs(k2) > l_ || std::abs(k3) > l_)
      throw std::out_of_range("PeriodicField: mode outside |k| <= L");
    const int n = side();
    return static_cast<std::size_t>(((k1 + l_) * n + (k2 + l_)) * n + (k3 + l_));
  }

  int l_;
  std::vector<CVec3> c_;
};

enum class Backend { spectral, quadrature };

/// Parseval: <Q(grad u)> = sum_k Q(Re E_k) + Q(Im E_k), E_k = i pi u_hat(k) (x) k.
inline double cell_average_q_spectral(const PeriodicField& u, const QuadraticForm& q = extremal_q()) {
  std::vector<double> terms;
  u.for_each_mode([&](int k1, int k2, int k3, const CVec3& c) {
    const Vec3 k(k1, k2, k3);
    const Eigen::Matrix<cplx, 3, 3> e = cplx(0.0, pi) * c * k.cast<cplx>().transpose();
    terms.push_back(q(MatrixVar(Mat3(e.real()))) + q(MatrixVar(Mat3(e.imag()))));
  });
  return ordered_sum(terms);
}

namespace detail {

// Real values of sum_k a(k) exp(i pi k.x) on the grid x_n = -1 + 2n/N, by three
// one-dimensional passes.
inline std::vector<double> synthesize(const std::vector<cplx>& a, int l, int n) {
  const int s = 2 * l + 1;
  std::vector<cplx> tw(static_cast<std::size_t>(n) * s);
  for (int i = 0; i < n; ++i)
    for (int k = -l; k <= l; ++k) tw[i * s + (k + l)] = std::exp(cplx(0.0, pi * k * (-1.0 + 2.0 * i / n)));

  std::vector<cplx> p1(static_cast<std::size_t>(n) * s * s, cplx(0.0));  // [x1][k2][k3]
  for (int i = 0; i < n; ++i)
    for (int k1 = 0; k1 < s; ++k1) {
      const cplx w = tw[i * s + k1];
      for (int r = 0; r < s * s; ++r) p1[i * s * s + r] += w * a[k1 * s * s + r];
    }
  std::vector<cplx> p2(static_cast<std::size_t>(n) * n * s, cplx(0.0));  // [x1][x2][k3]
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k2 = 0; k2 < s; ++k2) {
        const cplx w = tw[j * s + k2];
        for (int k3 = 0; k3 < s; ++k3) p2[(i * n + j) * s + k3] += w * p1[(i * s + k2) * s + k3];
      }
  std::vector<double> out(static_cast<std::size_t>(n) * n * n);
  for (int ij = 0; ij < n * n; ++ij)
    for (int m = 0; m < n; ++m) {
      cplx sum(0.0);
      for (int k3 = 0; k3 < s; ++k3) sum += tw[m * s + k3] * p2[ij * s + k3];
      out[ij * n + m] = sum.real();
    }
  return out;
}

}  // namespace detail

/// Periodic trapezoid average of Q(grad u) on an N^3 grid. Exact for N >= 2L+2.
inline double cell_average_q_quadrature(const PeriodicField& u, int n, const QuadraticForm& q = extremal_q()) {
  const int l = u.max_mode();
  if (n < 2 * l + 2) throw std::invalid_argument("cell_average_q_quadrature: need N >= 2L+2");
  const int s = u.side();
  std::array<std::vector<double>, 9> grad;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      std::vector<cplx> a(static_cast<std::size_t>(s) * s * s);
      std::size_t idx = 0;
      u.for_each_mode([&](int k1, int k2, int k3, const CVec3& c) {
        const int kj = j == 0 ? k1 : (j == 1 ? k2 : k3);
        a[idx++] = cplx(0.0, pi * kj) * c(i);
      });
      grad[var_index(i, j)] = detail::synthesize(a, l, n);
    }
  const std::size_t total = static_cast<std::size_t>(n) * n * n;
  std::vector<double> vals(total);
  for (std::size_t p = 0; p < total; ++p) {
    Vec9 xi;
    for (int a = 0; a < 9; ++a) xi(a) = grad[a][p];
    vals[p] = q(MatrixVar(xi));
  }
  return ordered_sum(vals) / static_cast<double>(total);
}

inline double cell_average_q(const PeriodicField& u, Backend backend, int n = 0,
                             const QuadraticForm& q = extremal_q()) {
  if (backend == Backend::spectral) return cell_average_q_spectral(u, q);
  return cell_average_q_quadrature(u, n > 0 ? n : 2 * u.max_mode() + 4, q);
}

/// L2 norm squared of grad u over the cell average, for relative comparisons.
inline double gradient_energy(const PeriodicField& u) {
  std::vector<double> terms;
  u.for_each_mode([&](int k1, int k2, int k3, const CVec3& c) {
    terms.push_back(pi * pi * Vec3(k1, k2, k3).squaredNorm() * c.squaredNorm());
  });
  return ordered_sum(terms);
}

/// Fourier support on l(+-1,+-1,+-1) with u_hat(k) parallel to the direction of k.
inline bool is_special(const PeriodicField& u, double tol = 1e-12) {
  bool ok = true;
  u.for_each_mode([&](int k1, int k2, int k3, const CVec3& c) {
    if (!ok || c.norm() <= tol) return;
    const int l = std::abs(k1);
    if (l == 0 || std::abs(k2) != l || std::abs(k3) != l) {
      ok = false;
      return;
    }
    const Vec3 d(k1 / l, k2 / l, k3 / l);
    const CVec3 dc = d.cast<cplx>();
    const CVec3 along = (dc.dot(c) / 3.0) * dc;
    if ((c - along).norm() > tol) ok = false;
  });
  return ok;
}

// ---------------------------------------------------------------------------
// Divergence of the flux rows.

inline Vec3 divergence_rows(const SpecialPotential& sp, const Vec3& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("divergence_rows: h must be positive");
  Vec3 div = Vec3::Zero();
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e(j) = h;
    const Mat3 d = (special_flux(sp, x + e) - special_flux(sp, x - e)) / (2.0 * h);
    div += d.col(j);
  }
  return div;
}

/// Exact d/dx_j of J, from the second derivatives of the profiles.
inline Mat3 flux_partial(const SpecialPotential& sp, const Vec3& x, int j) {
  Mat3 de = Mat3::Zero();
  for (int m = 0; m < 4; ++m) {
    const Vec3& k = SpecialPotential::directions()[m];
    de += sp.v[m].second_derivative(k.dot(x)) * k(j) * k * k.transpose();
  }
  return flux(extremal_q(), MatrixVar(de));
}

struct DivergenceStudy {
  std::array<double, 3> h{};
  std::array<double, 3> residual{};    // max |div J| by central differences
  std::array<double, 3> term_error{};  // max |D_j J_ij - dJ_ij/dx_j| over i, j
  double observed_order = 0.0;         // min of the two log2 error ratios
};

/// Central differences of the opposite-signed directions cancel exactly in the
/// row sum, so the convergence order is read off the individual terms.
inline DivergenceStudy divergence_study(const SpecialPotential& sp, const Vec3& x, double h0 = 1e-3) {
  DivergenceStudy s;
  for (int lvl = 0; lvl < 3; ++lvl) {
    const double h = h0 / std::pow(2.0, lvl);
    s.h[lvl] = h;
    s.residual[lvl] = divergence_rows(sp, x, h).cwiseAbs().maxCoeff();
    double err = 0.0;
    for (int j = 0; j < 3; ++j) {
      Vec3 e = Vec3::Zero();
      e(j) = h;
      const Mat3 fd = (special_flux(sp, x + e) - special_flux(sp, x - e)) / (2.0 * h);
      err = std::max(err, (fd.col(j) - flux_partial(sp, x, j).col(j)).cwiseAbs().maxCoeff());
    }
    s.term_error[lvl] = err;
  }
  if (s.term_error[1] > 0.0 && s.term_error[2] > 0.0)
    s.observed_order = std::min(std::log2(s.term_error[0] / s.term_error[1]),
                                std::log2(s.term_error[1] / s.term_error[2]));
  return s;
}

// ---------------------------------------------------------------------------
// Subdomains and quadrature.

struct QuadraturePoint {
  Vec3 x;
  double w;
  Vec3 normal = Vec3::Zero();  // surface rules only
};

/// Nodes and weights on [-1, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1");
  const std::vector<double> pos = boost::math::legendre_p_zeros<double>(n);
  std::vector<double> x, w;
  for (double z : pos) {
    const double dp = boost::math::legendre_p_prime(n, z);
    const double wz = 2.0 / ((1.0 - z * z) * dp * dp);
    x.push_back(z);
    w.push_back(wz);
    if (z != 0.0) {
      x.push_back(-z);
      w.push_back(wz);
    }
  }
  return {x, w};
}

class Subdomain {
 public:
  enum class Kind { box, ball };

  static Subdomain box(const Vec3& center, const Vec3& half_widths) {
    if ((half_widths.array() <= 0.0).any()) throw std::invalid_argument("Subdomain: half-widths must be positive");
    if (((center.cwiseAbs() + half_widths).array() >= 1.0).any())
      throw std::invalid_argument("Subdomain: box must lie inside the open cell (-1,1)^3");
    return Subdomain(Kind::box, center, half_widths, 0.0);
  }

  static Subdomain ball(const Vec3& center, double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("Subdomain: radius must be positive");
    if (((center.cwiseAbs().array() + radius) >= 1.0).any())
      throw std::invalid_argument("Subdomain: ball must lie inside the open cell (-1,1)^3");
    return Subdomain(Kind::ball, center, Vec3::Zero(), radius);
  }

  Kind kind() const { return kind_; }
  const Vec3& center() const { return center_; }
  const Vec3& half_widths() const { return half_; }
  double radius() const { return radius_; }

  double volume() const {
    return kind_ == Kind::box ? 8.0 * half_.prod() : 4.0 / 3.0 * pi * radius_ * radius_ * radius_;
  }

  std::vector<QuadraturePoint> volume_rule(int n) const {
    const auto [gx, gw] = gauss_legendre(n);
    std::vector<QuadraturePoint> pts;
    if (kind_ == Kind::box) {
      const double jac = half_.prod();
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c)
            pts.push_back({center_ + half_.cwiseProduct(Vec3(gx[a], gx[b], gx[c])), jac * gw[a] * gw[b] * gw[c]});
      return pts;
    }
    for (const auto& s : sphere_rule(n))
      for (int a = 0; a < n; ++a) {
        const double r = 0.5 * radius_ * (gx[a] + 1.0);
        pts.push_back({center_ + r * s.normal, s.w * 0.5 * radius_ * gw[a] * r * r});
      }
    return pts;
  }

  std::vector<QuadraturePoint> surface_rule(int n) const {
    std::vector<QuadraturePoint> pts;
    if (kind_ == Kind::ball) {
      for (const auto& s : sphere_rule(n))
        pts.push_back({center_ + radius_ * s.normal, s.w * radius_ * radius_, s.normal});
      return pts;
    }
    const auto [gx, gw] = gauss_legendre(n);
    for (int axis = 0; axis < 3; ++axis) {
      const int p = (axis + 1) % 3, q = (axis + 2) % 3;
      for (double side : {-1.0, 1.0}) {
        Vec3 normal = Vec3::Zero();
        normal(axis) = side;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            Vec3 x = center_;
            x(axis) += side * half_(axis);
            x(p) += half_(p) * gx[a];
            x(q) += half_(q) * gx[b];
            pts.push_back({x, half_(p) * half_(q) * gw[a] * gw[b], normal});
          }
      }
    }
    return pts;
  }

  /// (1 - s^2)^3 per coordinate (box) or in the radius (ball); zero with its
  /// gradient on the boundary.
  double cutoff(const Vec3& x, Vec3* grad = nullptr) const {
    auto bump = [](double s, double& ds) {
      const double t = 1.0 - s * s;
      if (t <= 0.0) {
        ds = 0.0;
        return 0.0;
      }
      ds = -6.0 * s * t * t;
      return t * t * t;
    };
    if (kind_ == Kind::box) {
      Vec3 f, df;
      for (int i = 0; i < 3; ++i) {
        f(i) = bump((x(i) - center_(i)) / half_(i), df(i));
        df(i) /= half_(i);
      }
      if (grad) *grad = Vec3(df(0) * f(1) * f(2), f(0) * df(1) * f(2), f(0) * f(1) * df(2));
      return f.prod();
    }
    const Vec3 d = (x - center_) / radius_;
    const double t = 1.0 - d.squaredNorm();
    if (t <= 0.0) {
      if (grad) grad->setZero();
      return 0.0;
    }
    if (grad) *grad = -6.0 * t * t * d / radius_;
    return t * t * t;
  }

 private:
  Subdomain(Kind k, const Vec3& c, const Vec3& h, double r) : kind_(k), center_(c), half_(h), radius_(r) {}

  // Unit sphere product rule: Gauss-Legendre in cos(theta), 2n-point trapezoid
  // in the azimuth. normal holds the unit direction.
  static std::vector<QuadraturePoint> sphere_rule(int n) {
    const auto [gx, gw] = gauss_legendre(n);
    const int m = 2 * n;
    std::vector<QuadraturePoint> pts;
    for (int a = 0; a < n; ++a) {
      const double ct = gx[a], st = std::sqrt(1.0 - ct * ct);
      for (int b = 0; b < m; ++b) {
        const double ph = 2.0 * pi * b / m;
        const Vec3 d(st * std::cos(ph), st * std::sin(ph), ct);
        pts.push_back({d, gw[a] * 2.0 * pi / m, d});
      }
    }
    return pts;
  }

  Kind kind_;
  Vec3 center_;
  Vec3 half_;
  double radius_;
};

inline constexpr int kDefaultQuadrature = 24;

/// Integral of Q(grad u) over the subdomain; grad_fn(x) returns grad u(x).
template <class GradFn>
double interior_energy(const Subdomain& omega, GradFn&& grad_fn, int n = kDefaultQuadrature,
                       const QuadraticForm& q = extremal_q(), unsigned threads = 1) {
  const auto pts = omega.volume_rule(n);
  std::vector<double> vals(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) {
    vals[i] = pts[i].w * q(MatrixVar(Mat3(grad_fn(pts[i].x))));
  });
  return ordered_sum(vals);
}

/// Surface integral of u . (J n) for the special potential.
inline double boundary_functional(const Subdomain& omega, const SpecialPotential& sp, int n = kDefaultQuadrature) {
  const auto pts = omega.surface_rule(n);
  std::vector<double> vals(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    vals[i] = pts[i].w * sp.potential(pts[i].x).dot(special_flux(sp, pts[i].x) * pts[i].normal);
  return ordered_sum(vals);
}

/// g(x) = linear x + sum_modes c cos(pi k.x) + s sin(pi k.x).
struct TrigField {
  struct Mode {
    Vec3 k, c, s;
  };
  Mat3 linear = Mat3::Zero();
  std::vector<Mode> modes;

  static TrigField random(int n_modes, int max_k, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> kd(-max_k, max_k);
    TrigField f;
    for (int i = 0; i < n_modes; ++i)
      f.modes.push_back({Vec3(kd(rng), kd(rng), kd(rng)), Vec3(g(rng), g(rng), g(rng)), Vec3(g(rng), g(rng), g(rng))});
    return f;
  }

  Vec3 value(const Vec3& x) const {
    Vec3 v = linear * x;
    for (const auto& m : modes) {
      const double t = pi * m.k.dot(x);
      v += std::cos(t) * m.c + std::sin(t) * m.s;
    }
    return v;
  }

  Mat3 gradient(const Vec3& x) const {
    Mat3 g = linear;
    for (const auto& m : modes) {
      const double t = pi * m.k.dot(x);
      g += (pi * (-std::sin(t) * m.c + std::cos(t) * m.s)) * m.k.transpose();
    }
    return g;
  }
};

/// w = cutoff * g, vanishing with its gradient on the boundary of its support
/// (the subdomain itself unless another one is given).
struct Perturbation {
  TrigField inner;
  double amplitude = 1.0;
  std::optional<Subdomain> support;  // cutoff domain, defaults to the integration domain

  Perturbation() = default;
  Perturbation(TrigField w, double amp, std::optional<Subdomain> supp = std::nullopt)
      : inner(std::move(w)), amplitude(amp), support(std::move(supp)) {}

  Vec3 value(const Subdomain& omega, const Vec3& x) const {
    return amplitude * support.value_or(omega).cutoff(x) * inner.value(x);
  }
  Mat3 gradient(const Subdomain& omega, const Vec3& x) const {
    Vec3 dphi;
    const double phi = support.value_or(omega).cutoff(x, &dphi);
    return amplitude * (phi * inner.gradient(x) + inner.value(x) * dphi.transpose());
  }
};

struct SharpBoundReport {
  double interior = 0.0;      // integral of Q(E + grad w)
  double boundary = 0.0;      // surface integral of u . J n
  double gap = 0.0;           // interior - boundary
  double base = 0.0;          // integral of Q(E)
  double cross = 0.0;         // integral of J : grad w
  double perturbation = 0.0;  // integral of Q(grad w)
  double decomposition_residual = 0.0;
  double boundary_max_w = 0.0;
  int volume_points = 0;
  int surface_points = 0;
};

inline SharpBoundReport sharp_bound_check(const Subdomain& omega, const SpecialPotential& sp,
                                          const Perturbation& w, int n = kDefaultQuadrature, unsigned threads = 1) {
  SharpBoundReport r;
  const auto surf = omega.surface_rule(n);
  for (const auto& p : surf) r.boundary_max_w = std::max(r.boundary_max_w, w.value(omega, p.x).cwiseAbs().maxCoeff());
  if (r.boundary_max_w > 1e-10)
    throw std::invalid_argument("sharp_bound_check: perturbation does not vanish on the boundary (max |w| = " +
                                std::to_string(r.boundary_max_w) + ")");

  const QuadraticForm q = extremal_q();
  const auto pts = omega.volume_rule(n);
  std::vector<double> tot(pts.size()), base(pts.size()), cross(pts.size()), pert(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) {
    const Vec3& x = pts[i].x;
    const Mat3 e = special_gradient(sp, x);
    const Mat3 gw = w.gradient(omega, x);
    const Mat3 j = flux(q, MatrixVar(e));
    tot[i] = pts[i].w * q(MatrixVar(Mat3(e + gw)));
    base[i] = pts[i].w * q(MatrixVar(e));
    cross[i] = pts[i].w * j.cwiseProduct(gw).sum();
    pert[i] = pts[i].w * q(MatrixVar(gw));
  });
  r.interior = ordered_sum(tot);
  r.base = ordered_sum(base);
  r.cross = ordered_sum(cross);
  r.perturbation = ordered_sum(pert);
  r.boundary = boundary_functional(omega, sp, n);
  r.gap = r.interior - r.boundary;
  r.decomposition_residual = r.interior - (r.base + 2.0 * r.cross + r.perturbation);
  r.volume_points = static_cast<int>(pts.size());
  r.surface_points = static_cast<int>(surf.size());
  return r;
}

}  // namespace qcvx
