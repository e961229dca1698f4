#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace qcvx {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat9 = Eigen::Matrix<double, 9, 9>;

// Entry order of a 3x3 matrix flattened to 9 coordinates:
// (11,22,33,12,23,31,21,32,13). The first six are the diagonal followed by
// the cyclic upper entries.
inline constexpr std::array<std::array<int, 2>, 9> kVarOrder = {{
    {0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {2, 0}, {1, 0}, {2, 1}, {0, 2}}};

inline constexpr std::array<std::array<int, 3>, 3> kVarIndex = {{
    {0, 3, 8}, {6, 1, 4}, {5, 7, 2}}};

constexpr int var_index(int row, int col) { return kVarIndex[row][col]; }

// Unordered index pairs {i,j} in the same layout as the first six variables.
inline constexpr std::array<std::array<int, 2>, 6> kPairOrder = {{
    {0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {2, 0}}};

inline constexpr std::array<std::array<int, 3>, 3> kPairIndex = {{
    {0, 3, 5}, {3, 1, 4}, {5, 4, 2}}};

constexpr int pair_index(int i, int j) { return kPairIndex[i][j]; }

inline Vec9 flatten(const Mat3& m) {
  Vec9 v;
  for (int a = 0; a < 9; ++a) v(a) = m(kVarOrder[a][0], kVarOrder[a][1]);
  return v;
}

inline Mat3 unflatten(const Vec9& v) {
  Mat3 m;
  for (int a = 0; a < 9; ++a) m(kVarOrder[a][0], kVarOrder[a][1]) = v(a);
  return m;
}

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Eigen-decomposition of a symmetric 3x3 matrix.
///
/// Eigenvalues come from the trigonometric solution of the characteristic
/// cubic and are sorted ascending; eigenvectors are recovered from cross
/// products of the rows of A - lambda*I. A repeated smallest eigenvalue is
/// handled by taking the orthogonal complement of the isolated eigenvector.
/// When the closed form loses accuracy (residual above 1e-10 relative) the
/// result is recomputed with an iterative solver.
struct SymEig3 {
  Vec3 values;   // ascending
  Mat3 vectors;  // column k pairs with values(k)
};

namespace detail {

inline Vec3 closed_form_eigenvalues(const Mat3& a) {
  const double p1 = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
  const double q = a.trace() / 3.0;
  const double d0 = a(0, 0) - q, d1 = a(1, 1) - q, d2 = a(2, 2) - q;
  const double p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
  if (p2 == 0.0) return Vec3::Constant(q);
  const double p = std::sqrt(p2 / 6.0);
  const Mat3 b = (a - q * Mat3::Identity()) / p;
  const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double hi = q + 2.0 * p * std::cos(phi);
  const double lo = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return Vec3(lo, 3.0 * q - hi - lo, hi);
}

// Null vector of (a - lambda I) from the largest row cross product, or a zero
// vector when the rows are (numerically) rank <= 1.
inline Vec3 kernel_vector(const Mat3& a, double lambda, double scale) {
  const Mat3 s = a - lambda * Mat3::Identity();
  const Vec3 r0 = s.row(0), r1 = s.row(1), r2 = s.row(2);
  const std::array<Vec3, 3> c = {r0.cross(r1), r0.cross(r2), r1.cross(r2)};
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (c[k].squaredNorm() > c[best].squaredNorm()) best = k;
  const double n2 = c[best].squaredNorm();
  if (n2 <= 1e-20 * scale * scale * scale * scale) return Vec3::Zero();
  return c[best] / std::sqrt(n2);
}

inline Vec3 any_orthogonal(const Vec3& u) {
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(u(i)) < std::abs(u(k))) k = i;
  return u.cross(Vec3::Unit(k)).normalized();
}

}  // namespace detail

inline SymEig3 eig_sym3(const Mat3& a) {
  SymEig3 out;
  const double scale = std::max(max_abs(a), 1e-300);
  out.values = detail::closed_form_eigenvalues(a);
  const double gap_lo = out.values(1) - out.values(0);
  const double gap_hi = out.values(2) - out.values(1);

  if (gap_lo <= 1e-14 * scale && gap_hi <= 1e-14 * scale) {
    out.vectors.setIdentity();
  } else {
    Vec3 v0 = detail::kernel_vector(a, out.values(0), scale);
    Vec3 v2 = detail::kernel_vector(a, out.values(2), scale);
    if (v0.isZero() && !v2.isZero()) {
      v0 = detail::any_orthogonal(v2);
    } else if (v2.isZero() && !v0.isZero()) {
      v2 = detail::any_orthogonal(v0);
    } else if (v0.isZero() && v2.isZero()) {
      v0 = Vec3::UnitX();
      v2 = Vec3::UnitZ();
    }
    // Re-orthogonalize the larger-gap vector against the better-separated one.
    if (gap_lo >= gap_hi) {
      v2 = (v2 - v2.dot(v0) * v0).normalized();
    } else {
      v0 = (v0 - v0.dot(v2) * v2).normalized();
    }
    out.vectors.col(0) = v0;
    out.vectors.col(2) = v2;
    out.vectors.col(1) = v2.cross(v0);
  }

  for (int k = 0; k < 3; ++k) {
    const Vec3 v = out.vectors.col(k);
    out.values(k) = v.dot(a * v);
  }
  double resid = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Vec3 v = out.vectors.col(k);
    resid = std::max(resid, (a * v - out.values(k) * v).norm());
  }
  const bool sorted = out.values(0) <= out.values(1) && out.values(1) <= out.values(2);
  if (resid > 1e-10 * std::max(1.0, scale) || !sorted) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(a);
    out.values = es.eigenvalues();
    out.vectors = es.eigenvectors();
  }
  return out;
}

}  // namespace qcvx
