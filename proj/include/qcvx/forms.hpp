#pragma once

// Quadratic forms on 3x3 gradient matrices, their rank-one restrictions and
// the null-Lagrangians spanned by the 2x2 minors.

#include "qcvx/linalg.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace qcvx {

/// A 3x3 matrix stored as 9 coordinates in kVarOrder.
class MatrixVar {
 public:
  MatrixVar() : v_(Vec9::Zero()) {}
  explicit MatrixVar(const Vec9& coords) : v_(coords) {}
  explicit MatrixVar(const Mat3& m) : v_(flatten(m)) {}

  static MatrixVar outer(const Vec3& x, const Vec3& y) {
    return MatrixVar(Mat3(x * y.transpose()));
  }
  static MatrixVar identity() { return MatrixVar(Mat3(Mat3::Identity())); }

  double operator()(int row, int col) const { return v_(var_index(row, col)); }
  const Vec9& coords() const { return v_; }
  Mat3 matrix() const { return unflatten(v_); }

 private:
  Vec9 v_;
};

/// f(xi) = xi^T M xi with M symmetric (asymmetric input is symmetrized).
class QuadraticForm {
 public:
  QuadraticForm() : m_(Mat9::Zero()) {}
  explicit QuadraticForm(const Mat9& m) : m_(0.5 * (m + m.transpose())) {}

  static QuadraticForm zero() { return QuadraticForm(); }
  static QuadraticForm frobenius() { return QuadraticForm(Mat9::Identity()); }

  const Mat9& matrix() const { return m_; }
  double coeff(int a, int b) const { return m_(a, b); }
  double max_abs_coeff() const { return max_abs(m_); }

  // Block on (xi11, xi22, xi33, xi12, xi23, xi31).
  auto principal_block() const { return m_.topLeftCorner<6, 6>(); }

  double operator()(const MatrixVar& xi) const {
    return xi.coords().dot(m_ * xi.coords());
  }

  friend QuadraticForm operator+(const QuadraticForm& a, const QuadraticForm& b) {
    return QuadraticForm(Mat9(a.m_ + b.m_));
  }
  friend QuadraticForm operator-(const QuadraticForm& a, const QuadraticForm& b) {
    return QuadraticForm(Mat9(a.m_ - b.m_));
  }
  friend QuadraticForm operator*(double s, const QuadraticForm& f) {
    return QuadraticForm(Mat9(s * f.m_));
  }

 private:
  Mat9 m_;
};

/// Coefficients of f(x (x) y) as a biquadratic polynomial.
///
/// Entry C(p, q) multiplies x_i x_j y_k y_l with p = {i,j} and q = {k,l}
/// enumerated as kPairOrder. Swap symmetry f(x,y) = f(y,x) is C = C^T.
class Biquadratic {
 public:
  Biquadratic() : c_(Mat6::Zero()) {}
  explicit Biquadratic(const Mat6& c) : c_(c) {}

  const Mat6& coeffs() const { return c_; }
  double max_abs_coeff() const { return max_abs(c_); }

  double operator()(const Vec3& x, const Vec3& y) const {
    Vec6 xm, ym;
    for (int p = 0; p < 6; ++p) {
      xm(p) = x(kPairOrder[p][0]) * x(kPairOrder[p][1]);
      ym(p) = y(kPairOrder[p][0]) * y(kPairOrder[p][1]);
    }
    return xm.dot(c_ * ym);
  }

  /// The biquadratic (x, y) -> B(A x, By y).
  Biquadratic composed_with(const Mat3& a, const Mat3& b) const {
    using Tensor4 = std::array<std::array<std::array<std::array<double, 3>, 3>, 3>, 3>;
    auto mult = [](int i, int j) { return i == j ? 1.0 : 2.0; };
    Tensor4 k{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int s = 0; s < 3; ++s)
          for (int t = 0; t < 3; ++t)
            k[i][j][s][t] = c_(pair_index(i, j), pair_index(s, t)) / (mult(i, j) * mult(s, t));
    // Contract one index at a time.
    Tensor4 w{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int s = 0; s < 3; ++s)
          for (int t = 0; t < 3; ++t) {
            double acc = 0.0;
            for (int m = 0; m < 3; ++m) acc += k[m][j][s][t] * a(m, i);
            w[i][j][s][t] = acc;
          }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int s = 0; s < 3; ++s)
          for (int t = 0; t < 3; ++t) {
            double acc = 0.0;
            for (int m = 0; m < 3; ++m) acc += w[i][m][s][t] * a(m, j);
            k[i][j][s][t] = acc;
          }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int s = 0; s < 3; ++s)
          for (int t = 0; t < 3; ++t) {
            double acc = 0.0;
            for (int m = 0; m < 3; ++m) acc += k[i][j][m][t] * b(m, s);
            w[i][j][s][t] = acc;
          }
    Mat6 out;
    for (int p = 0; p < 6; ++p)
      for (int q = 0; q < 6; ++q) {
        const int i = kPairOrder[p][0], j = kPairOrder[p][1];
        const int s = kPairOrder[q][0], t = kPairOrder[q][1];
        double acc = 0.0;
        for (int m = 0; m < 3; ++m) acc += w[i][j][s][m] * b(m, t);
        out(p, q) = mult(i, j) * mult(s, t) * acc;
      }
    return Biquadratic(out);
  }

 private:
  Mat6 c_;
};

/// The y-matrix T(y) with f(x (x) y) = x^T T(y) x.
///
/// Stored as nine 3x3 symmetric blocks G_ij with T(y)_ij = y^T G_ij y. The
/// same blocks give the dual x-matrix H(x) = sum_ij x_i x_j G_ij, so that
/// f(x (x) y) = y^T H(x) y.
class AcousticMatrix {
 public:
  AcousticMatrix() { blocks_.fill(Mat3::Zero()); }
  explicit AcousticMatrix(const std::array<Mat3, 9>& blocks) : blocks_(blocks) {}

  const Mat3& block(int i, int j) const { return blocks_[3 * i + j]; }

  Mat3 operator()(const Vec3& y) const {
    Mat3 t;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        t(i, j) = y.dot(block(i, j) * y);
        t(j, i) = t(i, j);
      }
    return t;
  }

  Mat3 dual(const Vec3& x) const {
    Mat3 h = Mat3::Zero();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) h += x(i) * x(j) * block(i, j);
    return h;
  }

 private:
  std::array<Mat3, 9> blocks_;
};

struct CubicParams {
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
};

struct CyclicParams {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

/// One coefficient per signed cofactor, enumerated in kVarOrder: entry k
/// multiplies the cofactor of the matrix entry kVarOrder[k].
struct NullLagrangianCoeffs {
  Vec9 values = Vec9::Zero();
};

enum class SymmetryKind { swap, cyclic, axis_reflection };

inline std::string to_string(SymmetryKind k) {
  switch (k) {
    case SymmetryKind::swap: return "swap";
    case SymmetryKind::cyclic: return "cyclic";
    case SymmetryKind::axis_reflection: return "axis_reflection";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------

inline double evaluate(const QuadraticForm& f, const MatrixVar& xi) { return f(xi); }

inline double evaluate_rank_one(const QuadraticForm& f, const Vec3& x, const Vec3& y) {
  return f(MatrixVar::outer(x, y));
}

inline AcousticMatrix acoustic_matrix(const QuadraticForm& f) {
  std::array<Mat3, 9> blocks;
  const Mat9& m = f.matrix();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      Mat3 g;
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) g(k, l) = m(var_index(i, k), var_index(j, l));
      blocks[3 * i + j] = 0.5 * (g + g.transpose());
    }
  return AcousticMatrix(blocks);
}

/// Cubic-symmetric elasticity-type tensor: T_iiii = alpha, T_iijj = beta,
/// T_ijij = T_ijji = gamma (i != j).
inline QuadraticForm from_cubic(const CubicParams& p) {
  Mat9 m = Mat9::Zero();
  for (int i = 0; i < 3; ++i) {
    m(var_index(i, i), var_index(i, i)) = p.alpha;
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      m(var_index(i, i), var_index(j, j)) = p.beta;
      m(var_index(i, j), var_index(i, j)) = p.gamma;
      m(var_index(i, j), var_index(j, i)) = p.gamma;
    }
  }
  return QuadraticForm(m);
}

/// a(sum xi_ii^2) + b(xi11 xi22 + xi22 xi33 + xi33 xi11)
///   + c(xi12^2 + xi23^2 + xi31^2) + d(xi21^2 + xi32^2 + xi13^2)
inline QuadraticForm from_cyclic(const CyclicParams& p) {
  Mat9 m = Mat9::Zero();
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3;
    m(var_index(i, i), var_index(i, i)) = p.a;
    m(var_index(i, i), var_index(j, j)) = p.b / 2.0;
    m(var_index(j, j), var_index(i, i)) = p.b / 2.0;
    m(var_index(i, j), var_index(i, j)) = p.c;
    m(var_index(j, i), var_index(j, i)) = p.d;
  }
  return QuadraticForm(m);
}

/// Principal part plus alpha xi12^2 + beta xi23^2 + gamma xi31^2.
inline QuadraticForm corollary_q(double alpha, double beta, double gamma) {
  Mat9 m = Mat9::Zero();
  for (int i = 0; i < 3; ++i) {
    const int j = (i + 1) % 3;
    m(var_index(i, i), var_index(i, i)) = 1.0;
    m(var_index(i, i), var_index(j, j)) = -1.0;
    m(var_index(j, j), var_index(i, i)) = -1.0;
  }
  m(var_index(0, 1), var_index(0, 1)) = alpha;
  m(var_index(1, 2), var_index(1, 2)) = beta;
  m(var_index(2, 0), var_index(2, 0)) = gamma;
  return QuadraticForm(m);
}

/// The extremal, non-polyconvex form
/// Q = xi11^2 + xi22^2 + xi33^2 - 2(xi11 xi22 + xi22 xi33 + xi33 xi11)
///     + xi12^2 + xi23^2 + xi31^2.
inline QuadraticForm extremal_q() { return corollary_q(1.0, 1.0, 1.0); }

/// Matrix N with xi^T N xi equal to the signed cofactor of entry kVarOrder[k].
inline Mat9 minor_matrix(int k) {
  const int r = kVarOrder[k][0], c = kVarOrder[k][1];
  const int r1 = (r + 1) % 3, r2 = (r + 2) % 3;
  const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
  Mat9 n = Mat9::Zero();
  const int p = var_index(r1, c1), q = var_index(r2, c2);
  const int s = var_index(r1, c2), t = var_index(r2, c1);
  n(p, q) += 0.5;
  n(q, p) += 0.5;
  n(s, t) -= 0.5;
  n(t, s) -= 0.5;
  return n;
}

inline const std::array<Mat9, 9>& minor_matrices() {
  static const std::array<Mat9, 9> all = [] {
    std::array<Mat9, 9> out;
    for (int k = 0; k < 9; ++k) out[k] = minor_matrix(k);
    return out;
  }();
  return all;
}

inline Mat9 null_lagrangian_matrix(const NullLagrangianCoeffs& alpha) {
  Mat9 m = Mat9::Zero();
  for (int k = 0; k < 9; ++k) m += alpha.values(k) * minor_matrices()[k];
  return m;
}

inline QuadraticForm null_lagrangian(const NullLagrangianCoeffs& alpha) {
  return QuadraticForm(null_lagrangian_matrix(alpha));
}

/// The nine signed cofactors of xi, in kVarOrder.
inline Vec9 minors(const MatrixVar& xi) {
  const Mat3 m = xi.matrix();
  Vec9 out;
  for (int k = 0; k < 9; ++k) {
    const int r = kVarOrder[k][0], c = kVarOrder[k][1];
    const int r1 = (r + 1) % 3, r2 = (r + 2) % 3;
    const int c1 = (c + 1) % 3, c2 = (c + 2) % 3;
    out(k) = m(r1, c1) * m(r2, c2) - m(r1, c2) * m(r2, c1);
  }
  return out;
}

/// Orthogonal (Frobenius) projection of a symmetric matrix onto the span of
/// the minor matrices. The minor matrices have disjoint supports, so the
/// projection decouples coefficient by coefficient.
struct MinorProjection {
  NullLagrangianCoeffs alpha;
  Mat9 residual;
  double residual_max_abs = 0.0;
};

inline MinorProjection project_on_minors(const Mat9& r) {
  MinorProjection out;
  Mat9 rest = r;
  for (int k = 0; k < 9; ++k) {
    const Mat9& n = minor_matrices()[k];
    const double a = (r.cwiseProduct(n)).sum() / n.squaredNorm();
    out.alpha.values(k) = a;
    rest -= a * n;
  }
  out.residual = rest;
  out.residual_max_abs = max_abs(rest);
  return out;
}

inline Biquadratic to_biquadratic(const QuadraticForm& f) {
  Mat6 c = Mat6::Zero();
  const Mat9& m = f.matrix();
  for (int a = 0; a < 9; ++a)
    for (int b = 0; b < 9; ++b) {
      const int p = pair_index(kVarOrder[a][0], kVarOrder[b][0]);
      const int q = pair_index(kVarOrder[a][1], kVarOrder[b][1]);
      c(p, q) += m(a, b);
    }
  return Biquadratic(c);
}

/// Places the coefficient of x_i x_j y_k y_l (i <= j, k <= l) on xi_ik xi_jl.
inline QuadraticForm canonical_lift(const Biquadratic& bq) {
  Mat9 m = Mat9::Zero();
  for (int p = 0; p < 6; ++p)
    for (int q = 0; q < 6; ++q) {
      const double c = bq.coeffs()(p, q);
      if (c == 0.0) continue;
      const int i = std::min(kPairOrder[p][0], kPairOrder[p][1]);
      const int j = std::max(kPairOrder[p][0], kPairOrder[p][1]);
      const int k = std::min(kPairOrder[q][0], kPairOrder[q][1]);
      const int l = std::max(kPairOrder[q][0], kPairOrder[q][1]);
      const int a = var_index(i, k), b = var_index(j, l);
      if (a == b) {
        m(a, a) += c;
      } else {
        m(a, b) += 0.5 * c;
        m(b, a) += 0.5 * c;
      }
    }
  return QuadraticForm(m);
}

inline bool approx_equal(const Biquadratic& a, const Biquadratic& b, double rel_tol = 1e-12) {
  const double scale = std::max({1.0, a.max_abs_coeff(), b.max_abs_coeff()});
  return max_abs(a.coeffs() - b.coeffs()) <= rel_tol * scale;
}

inline bool approx_equal(const QuadraticForm& a, const QuadraticForm& b, double rel_tol = 1e-12) {
  const double scale = std::max({1.0, a.max_abs_coeff(), b.max_abs_coeff()});
  return max_abs(a.matrix() - b.matrix()) <= rel_tol * scale;
}

inline bool symmetry_check(const Biquadratic& bq, SymmetryKind kind, double rel_tol = 1e-12) {
  switch (kind) {
    case SymmetryKind::swap:
      return approx_equal(bq, Biquadratic(Mat6(bq.coeffs().transpose())), rel_tol);
    case SymmetryKind::cyclic: {
      Mat3 p;
      p << 0, 1, 0,
           0, 0, 1,
           1, 0, 0;
      return approx_equal(bq, bq.composed_with(p, p), rel_tol);
    }
    case SymmetryKind::axis_reflection:
      for (int i = 0; i < 3; ++i) {
        Mat3 r = Mat3::Identity();
        r(i, i) = -1.0;
        if (!approx_equal(bq, bq.composed_with(r, r), rel_tol)) return false;
      }
      return true;
  }
  return false;
}

/// J = M xi, so that sum_ij J_ij xi_ij = f(xi).
inline Mat3 flux(const QuadraticForm& f, const MatrixVar& xi) {
  return unflatten(Vec9(f.matrix() * xi.coords()));
}

}  // namespace qcvx
