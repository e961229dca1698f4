#pragma once

// Polyconvexity of quadratic forms: f is polyconvex iff M_f - sum_k a_k N_k
// is positive semidefinite for some null-Lagrangian coefficients a.

#include "qcvx/forms.hpp"
#include "qcvx/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcvx {

struct PolyConfig {
  int max_iter = 5000;   // per restart
  int restarts = 20;     // alpha = 0, minor projection, then Gaussian draws
  double tol = 1e-9;     // on the normalized form
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

/// Certificate that no null-Lagrangian can make M_f - sum a_k N_k PSD.
///
/// Every minor matrix has a zero diagonal, so a variable v with M_f(v,v) = 0
/// keeps a zero diagonal entry for every a; PSD then forces the whole row v
/// of M_f - sum a_k N_k to vanish. Those rows are linear constraints on a.
/// When they pin a down uniquely and the remaining matrix is indefinite, the
/// form is not polyconvex.
struct StructuralCertificate {
  std::vector<int> forced_zero_rows;  // variable indices (kVarOrder)
  int constraint_rank = 0;
  NullLagrangianCoeffs forced_alpha;
  MatrixVar negative_point;
  double value = 0.0;                  // (M_f - sum a_k N_k)(eta)
  double form_value = 0.0;             // f(eta)
  std::optional<long long> exact_form_value;  // when M_f and eta are integral
};

struct PolyVerdict {
  enum class Status { polyconvex, not_polyconvex, inconclusive };

  Status status = Status::inconclusive;
  NullLagrangianCoeffs alpha;      // certificate, forced, or best found
  double lambda_min = 0.0;         // of M_f - sum a_k N_k, original units
  std::optional<StructuralCertificate> structural;
  int restarts_run = 0;
  int iterations = 0;
};

inline std::string to_string(PolyVerdict::Status s) {
  switch (s) {
    case PolyVerdict::Status::polyconvex: return "polyconvex";
    case PolyVerdict::Status::not_polyconvex: return "not_polyconvex";
    case PolyVerdict::Status::inconclusive: return "inconclusive";
  }
  return "unknown";
}

inline std::string var_name(int a) {
  return "xi" + std::to_string(kVarOrder[a][0] + 1) + std::to_string(kVarOrder[a][1] + 1);
}

inline double min_eigenvalue(const Mat9& m) {
  Eigen::SelfAdjointEigenSolver<Mat9> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline std::optional<long long> exact_integer_value(const QuadraticForm& f, const MatrixVar& eta) {
  auto integral = [](double v) { return std::abs(v) < 1e15 && v == std::round(v); };
  const Mat9& m = f.matrix();
  const Vec9& e = eta.coords();
  for (int a = 0; a < 9; ++a) {
    if (!integral(e(a))) return std::nullopt;
    for (int b = 0; b < 9; ++b)
      if (!integral(m(a, b))) return std::nullopt;
  }
  long long acc = 0;
  for (int a = 0; a < 9; ++a)
    for (int b = 0; b < 9; ++b)
      acc += std::llround(m(a, b)) * std::llround(e(a)) * std::llround(e(b));
  return acc;
}

inline std::optional<StructuralCertificate> structural_disproof(const QuadraticForm& f,
                                                                double tol = 1e-9,
                                                                std::uint64_t seed = 1) {
  const double scale = f.max_abs_coeff();
  if (scale == 0.0) return std::nullopt;
  const Mat9& m = f.matrix();

  StructuralCertificate cert;
  for (int v = 0; v < 9; ++v)
    if (std::abs(m(v, v)) <= tol * scale) cert.forced_zero_rows.push_back(v);
  if (cert.forced_zero_rows.empty()) return std::nullopt;

  const auto rows = static_cast<Eigen::Index>(9 * cert.forced_zero_rows.size());
  Eigen::MatrixXd a(rows, 9);
  Eigen::VectorXd b(rows);
  Eigen::Index r = 0;
  for (int v : cert.forced_zero_rows)
    for (int w = 0; w < 9; ++w, ++r) {
      for (int k = 0; k < 9; ++k) a(r, k) = minor_matrices()[k](v, w);
      b(r) = m(v, w);
    }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-12);
  cert.constraint_rank = static_cast<int>(qr.rank());
  if (cert.constraint_rank < 9) return std::nullopt;
  const Vec9 alpha = qr.solve(b);
  if ((a * alpha - b).cwiseAbs().maxCoeff() > tol * scale) return std::nullopt;
  for (int k = 0; k < 9; ++k)
    if (std::abs(alpha(k)) <= 1e-14 * scale) cert.forced_alpha.values(k) = 0.0;
    else cert.forced_alpha.values(k) = alpha(k);

  const QuadraticForm g(Mat9(m - null_lagrangian_matrix(cert.forced_alpha)));
  std::vector<MatrixVar> candidates{MatrixVar::identity()};
  {
    Eigen::SelfAdjointEigenSolver<Mat9> es(g.matrix());
    candidates.emplace_back(Vec9(es.eigenvectors().col(0)));
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < 64; ++s) {
    Vec9 v;
    for (int k = 0; k < 9; ++k) v(k) = gauss(rng);
    candidates.emplace_back(v);
  }
  for (const MatrixVar& eta : candidates) {
    const double gv = g(eta);
    if (gv < -tol * scale * eta.coords().squaredNorm()) {
      cert.negative_point = eta;
      cert.value = gv;
      cert.form_value = f(eta);
      cert.exact_form_value = exact_integer_value(f, eta);
      return cert;
    }
  }
  return std::nullopt;
}

namespace detail {

struct AscentResult {
  Vec9 alpha;
  double value = -std::numeric_limits<double>::infinity();
  int iterations = 0;
};

// Supergradient ascent on a -> lambda_min(m - sum a_k N_k) with Polyak steps
// toward a moving target level. The supergradient is -v^T N_k v for the
// bottom eigenvector v, averaged over the eigenspace when it is repeated.
inline AscentResult ascend(const Mat9& m, const Vec9& start, int max_iter, double stop_at) {
  const auto& mins = minor_matrices();
  auto eval = [&](const Vec9& alpha, Vec9& grad) {
    Mat9 g = m;
    for (int k = 0; k < 9; ++k) g -= alpha(k) * mins[k];
    Eigen::SelfAdjointEigenSolver<Mat9> es(g);
    const double lo = es.eigenvalues()(0);
    grad.setZero();
    int mult = 0;
    for (int j = 0; j < 9 && es.eigenvalues()(j) - lo <= 1e-8; ++j, ++mult) {
      const Vec9 v = es.eigenvectors().col(j);
      for (int k = 0; k < 9; ++k) grad(k) -= v.dot(mins[k] * v);
    }
    grad /= mult;
    return lo;
  };

  AscentResult best;
  Vec9 alpha = start, grad;
  double h = eval(alpha, grad);
  best.alpha = alpha;
  best.value = h;
  double delta = std::max(0.1, 0.5 * std::abs(h));
  int stall = 0;
  for (int it = 0; it < max_iter; ++it) {
    best.iterations = it + 1;
    if (best.value >= stop_at) break;
    const double gn2 = grad.squaredNorm();
    if (gn2 < 1e-30) break;  // a stationary point of a concave function is optimal
    const double target = best.value + delta;
    alpha += ((target - h) / gn2) * grad;
    h = eval(alpha, grad);
    if (h > best.value) {
      if (h >= target - 0.5 * delta) delta *= 1.5;
      best.value = h;
      best.alpha = alpha;
      stall = 0;
    } else if (++stall >= 25) {
      delta *= 0.5;
      stall = 0;
      alpha = best.alpha;
      h = eval(alpha, grad);
    }
    if (delta < 1e-16) break;
  }
  return best;
}

}  // namespace detail

inline PolyVerdict feasibility(const QuadraticForm& f, const PolyConfig& cfg = {}) {
  PolyVerdict out;
  if (auto cert = structural_disproof(f, cfg.tol, cfg.seed)) {
    out.status = PolyVerdict::Status::not_polyconvex;
    out.alpha = cert->forced_alpha;
    out.lambda_min = min_eigenvalue(f.matrix() - null_lagrangian_matrix(cert->forced_alpha));
    out.structural = std::move(cert);
    return out;
  }
  const double scale = f.max_abs_coeff();
  if (scale == 0.0) {
    out.status = PolyVerdict::Status::polyconvex;
    return out;
  }
  const Mat9 m = f.matrix() / scale;

  std::vector<Vec9> starts{Vec9::Zero(), project_on_minors(m).alpha.values};
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  while (static_cast<int>(starts.size()) < std::max(cfg.restarts, 1)) {
    Vec9 v;
    for (int k = 0; k < 9; ++k) v(k) = gauss(rng);
    starts.push_back(v);
  }
  starts.resize(static_cast<std::size_t>(std::max(cfg.restarts, 1)));

  std::vector<detail::AscentResult> results(starts.size());
  const std::size_t batch = resolve_threads(cfg.threads);
  std::size_t done = 0;
  std::size_t best = 0;
  while (done < starts.size()) {
    const std::size_t hi = std::min(starts.size(), done + batch);
    parallel_for(hi - done, cfg.threads, [&](std::size_t i) {
      results[done + i] = detail::ascend(m, starts[done + i], cfg.max_iter, 0.0);
    });
    for (std::size_t i = done; i < hi; ++i) {
      out.iterations += results[i].iterations;
      if (results[i].value > results[best].value) best = i;
    }
    out.restarts_run = static_cast<int>(hi);
    // First feasible restart in index order wins.
    for (std::size_t i = done; i < hi; ++i) {
      if (results[i].value >= -cfg.tol) {
        out.status = PolyVerdict::Status::polyconvex;
        out.alpha.values = results[i].alpha * scale;
        out.lambda_min = min_eigenvalue(f.matrix() - null_lagrangian_matrix(out.alpha));
        return out;
      }
    }
    done = hi;
  }
  out.status = PolyVerdict::Status::inconclusive;
  out.alpha.values = results[best].alpha * scale;
  out.lambda_min = min_eigenvalue(f.matrix() - null_lagrangian_matrix(out.alpha));
  return out;
}

/// A weighted square w * (c . xi)^2. Coefficients are scaled so the
/// largest-magnitude entry is +1.
struct SquareTerm {
  double weight = 0.0;
  Vec9 coeffs = Vec9::Zero();
};

struct ConvexSplit {
  std::vector<SquareTerm> squares;  // descending weight
  Mat9 residual = Mat9::Zero();     // M_f - squares - null part
  double residual_max_abs = 0.0;
};

inline SquareTerm normalized_square(double lambda, const Vec9& v) {
  Eigen::Index k = 0;
  v.cwiseAbs().maxCoeff(&k);
  const double lead = v(k);
  return {lambda * lead * lead, v / lead};
}

inline ConvexSplit convex_split(const QuadraticForm& f, const NullLagrangianCoeffs& alpha,
                                double tol = 1e-9) {
  const Mat9 g = f.matrix() - null_lagrangian_matrix(alpha);
  const double scale = std::max(max_abs(f.matrix()), max_abs(g));
  ConvexSplit out;
  if (scale == 0.0) return out;
  Eigen::SelfAdjointEigenSolver<Mat9> es(g);
  if (es.eigenvalues()(0) < -tol * scale)
    throw std::invalid_argument("convex_split: residual form is not positive semidefinite (lambda_min = " +
                                std::to_string(es.eigenvalues()(0)) + ")");
  Mat9 recon = Mat9::Zero();
  for (int j = 8; j >= 0; --j) {
    const double lam = es.eigenvalues()(j);
    if (lam <= 1e-12 * scale) continue;
    const SquareTerm sq = normalized_square(lam, es.eigenvectors().col(j));
    recon += sq.weight * sq.coeffs * sq.coeffs.transpose();
    out.squares.push_back(sq);
  }
  out.residual = g - recon;
  out.residual_max_abs = max_abs(out.residual);
  return out;
}

}  // namespace qcvx
