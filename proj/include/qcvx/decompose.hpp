#pragma once

// Constructive decomposition of quasiconvex cubic-symmetric forms into
// nonnegative squares plus a null-Lagrangian.

#include "qcvx/forms.hpp"
#include "qcvx/polyconvexity.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcvx {

struct DecompositionCertificate {
  int case_id = 1;  // 1: beta+gamma >= 0, 2: beta+gamma < 0
  double beta_prime = 0.0;
  double gamma_prime = 0.0;
  std::vector<SquareTerm> squares;  // zero weights are kept
  NullLagrangianCoeffs null_part;
  double projection_residual = 0.0;
};

namespace detail {

inline double admissibility_slack(const CubicParams& p) {
  return 1e-12 * std::max({1.0, std::abs(p.alpha), std::abs(p.beta), std::abs(p.gamma)});
}

}  // namespace detail

/// Name of the first violated admissibility inequality, if any.
inline std::optional<std::string> cubic_violation(const CubicParams& p) {
  const double eps = detail::admissibility_slack(p);
  if (p.alpha < -eps) return "alpha >= 0";
  if (p.gamma < -eps) return "gamma >= 0";
  if (p.beta + p.gamma > p.alpha + p.gamma + eps) return "beta + gamma <= alpha + gamma";
  if (p.beta + p.gamma < -p.alpha / 2.0 - p.gamma - eps) return "beta + gamma >= -alpha/2 - gamma";
  return std::nullopt;
}

/// alpha >= 0, gamma >= 0 and -alpha/2 - gamma <= beta + gamma <= alpha + gamma.
/// Equivalent to rank-one convexity of from_cubic(p).
inline bool cubic_admissible(const CubicParams& p) { return !cubic_violation(p).has_value(); }

/// Signed distance-like margin: the smallest slack among the admissibility
/// inequalities (negative when one is violated).
inline double cubic_margin(const CubicParams& p) {
  return std::min({p.alpha, p.gamma, p.alpha - p.beta, p.beta + 2.0 * p.gamma + p.alpha / 2.0});
}

namespace detail {

inline Vec9 linear_form(std::initializer_list<std::pair<std::array<int, 2>, double>> terms) {
  Vec9 c = Vec9::Zero();
  for (const auto& [rc, w] : terms) c(var_index(rc[0], rc[1])) += w;
  return c;
}

}  // namespace detail

inline DecompositionCertificate decompose_cubic(const CubicParams& p) {
  if (auto bad = cubic_violation(p))
    throw std::invalid_argument("decompose_cubic: inadmissible parameters, violates " + *bad);

  DecompositionCertificate cert;
  if (p.alpha + p.gamma <= 0.0) return cert;  // admissible forces beta = 0: the zero form

  const double s = p.beta + p.gamma;
  using detail::linear_form;
  const double eps = detail::admissibility_slack(p);
  // Boundary parameters can round a zero weight to -1e-17.
  auto add = [&](double w, const Vec9& c) { cert.squares.push_back({(w < 0.0 && w >= -eps) ? 0.0 : w, c}); };
  const std::array<std::array<int, 2>, 3> off = {{{0, 1}, {0, 2}, {1, 2}}};

  if (s >= 0.0) {
    cert.case_id = 1;
    cert.beta_prime = s * p.alpha / (p.alpha + p.gamma);
    cert.gamma_prime = s * p.gamma / (p.alpha + p.gamma);
    for (int i = 0; i < 3; ++i) add(p.alpha - cert.beta_prime, linear_form({{{i, i}, 1.0}}));
    add(cert.beta_prime, linear_form({{{0, 0}, 1.0}, {{1, 1}, 1.0}, {{2, 2}, 1.0}}));
    for (const auto& [i, j] : off) add(cert.gamma_prime, linear_form({{{i, j}, 1.0}, {{j, i}, 1.0}}));
  } else {
    cert.case_id = 2;
    cert.beta_prime = -s * p.alpha / (p.alpha + 2.0 * p.gamma);
    cert.gamma_prime = -2.0 * s * p.gamma / (p.alpha + 2.0 * p.gamma);
    for (int i = 0; i < 3; ++i) add(p.alpha - 2.0 * cert.beta_prime, linear_form({{{i, i}, 1.0}}));
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      add(cert.beta_prime, linear_form({{{i, i}, 1.0}, {{j, j}, -1.0}}));
    }
    for (const auto& [i, j] : off) add(cert.gamma_prime, linear_form({{{i, j}, 1.0}, {{j, i}, -1.0}}));
  }
  for (const auto& [i, j] : off) {
    add(p.gamma - cert.gamma_prime, linear_form({{{i, j}, 1.0}}));
    add(p.gamma - cert.gamma_prime, linear_form({{{j, i}, 1.0}}));
  }

  Mat9 rest = from_cubic(p).matrix();
  for (const SquareTerm& sq : cert.squares) rest -= sq.weight * sq.coeffs * sq.coeffs.transpose();
  const MinorProjection proj = project_on_minors(rest);
  cert.null_part = proj.alpha;
  cert.projection_residual = proj.residual_max_abs;
  return cert;
}

inline Mat9 reconstruct(const DecompositionCertificate& cert) {
  Mat9 m = null_lagrangian_matrix(cert.null_part);
  for (const SquareTerm& sq : cert.squares) m += sq.weight * sq.coeffs * sq.coeffs.transpose();
  return m;
}

/// Rebuilds sum w (c . xi)^2 + null part and compares with f coefficientwise.
inline bool verify_certificate(const QuadraticForm& f, const DecompositionCertificate& cert,
                               double rel_tol = 1e-12) {
  for (const SquareTerm& sq : cert.squares)
    if (!(sq.weight >= 0.0)) return false;
  const double scale = std::max(1.0, f.max_abs_coeff());
  if (cert.projection_residual > rel_tol * scale) return false;
  return max_abs(reconstruct(cert) - f.matrix()) <= rel_tol * scale;
}

}  // namespace qcvx
