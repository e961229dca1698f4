#pragma once

// Rank-one convexity certification: global minimization of the smallest
// eigenvalue of the y-matrix T(y) over the unit sphere.

#include "qcvx/forms.hpp"
#include "qcvx/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcvx {

struct SearchConfig {
  int grid_size = 10000;   // Fibonacci lattice points
  int multistarts = 50;    // seeded random starts
  int grid_starts = 32;    // well-separated lowest grid points used as starts
  int max_iter = 2000;     // per descent
  double tol = 1e-9;       // certification tolerance on the normalized form
  std::uint64_t seed = 1;
  unsigned threads = 1;    // 0 = hardware concurrency

  void validate() const {
    if (grid_size < 12) throw std::invalid_argument("grid_size must be >= 12");
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    if (multistarts < 0 || grid_starts < 0) throw std::invalid_argument("start counts must be >= 0");
    if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  }
};

struct ZeroPoint {
  Vec3 x;
  Vec3 y;
  double value = 0.0;
};

struct Verdict {
  enum class Status { certified, violated, marginal };

  Status status = Status::marginal;
  // certified: global bottom; violated: witness value; marginal: bottom found.
  double min_value = 0.0;
  Vec3 x = Vec3::UnitX();  // attaining / witness pair
  Vec3 y = Vec3::UnitX();
  std::vector<ZeroPoint> zero_points;

  int descents = 0;
  int not_converged = 0;
  bool zero_form = false;

  bool rank_one_convex() const { return status != Status::violated; }
  // Marginal with no zero point to show for it.
  bool inconclusive() const { return status == Status::marginal && zero_points.empty(); }
};

inline std::string to_string(Verdict::Status s) {
  switch (s) {
    case Verdict::Status::certified: return "certified";
    case Verdict::Status::violated: return "violated";
    case Verdict::Status::marginal: return "marginal";
  }
  return "unknown";
}

struct MinEig {
  double value = 0.0;
  Vec3 vector = Vec3::UnitX();
  double second = 0.0;  // next eigenvalue, for degeneracy tests
};

inline MinEig min_eig(const AcousticMatrix& t, const Vec3& y) {
  const SymEig3 e = eig_sym3(t(y));
  return {e.values(0), e.vectors.col(0), e.values(1)};
}

inline double det_acoustic(const QuadraticForm& f, const Vec3& y) {
  return acoustic_matrix(f)(y).determinant();
}

inline std::vector<Vec3> fibonacci_sphere(int n) {
  std::vector<Vec3> pts(static_cast<std::size_t>(n));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    pts[static_cast<std::size_t>(i)] = Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }
  return pts;
}

/// Flip signs so the first non-negligible component is positive.
inline Vec3 canonical_sign(const Vec3& v) {
  for (int i = 0; i < 3; ++i) {
    if (std::abs(v(i)) > 1e-12) return v(i) < 0 ? Vec3(-v) : v;
  }
  return v;
}

/// One representative per antipodal pair of the 26 lattice directions with
/// entries in {-1, 0, 1}.
inline const std::vector<Vec3>& symmetry_directions() {
  static const std::vector<Vec3> dirs = [] {
    std::vector<Vec3> out;
    for (int a = -1; a <= 1; ++a)
      for (int b = -1; b <= 1; ++b)
        for (int c = -1; c <= 1; ++c) {
          const Vec3 v(a, b, c);
          if (v.squaredNorm() == 0.0 || canonical_sign(v) != v) continue;
          out.push_back(v.normalized());
        }
    return out;
  }();
  return dirs;
}

namespace detail {

struct DescentResult {
  Vec3 y;
  MinEig eig;
  bool converged = false;
  int iterations = 0;
};

// Projected gradient descent of y -> lambda_min(T(y)) on the unit sphere.
// The gradient of v^T T(y) v is 2 H(v) y with H the dual x-matrix
// (Hellmann-Feynman). Near a repeated smallest eigenvalue the steepest of the
// eigenspace candidates is used.
inline DescentResult descend(const AcousticMatrix& t, const Vec3& start, int max_iter,
                             double stop_below) {
  DescentResult r;
  r.y = start.normalized();
  r.eig = min_eig(t, r.y);
  double step = 0.25;
  double grad_norm = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    r.iterations = it + 1;
    if (r.eig.value < stop_below) return r;

    std::vector<Vec3> candidates{r.eig.vector};
    if (r.eig.second - r.eig.value < 1e-8) {
      const SymEig3 e = eig_sym3(t(r.y));
      candidates = {e.vectors.col(0), e.vectors.col(1),
                    (e.vectors.col(0) + e.vectors.col(1)).normalized()};
    }
    Vec3 rg = Vec3::Zero();
    for (const Vec3& v : candidates) {
      const Vec3 g = 2.0 * (t.dual(v) * r.y);
      const Vec3 tangent = g - g.dot(r.y) * r.y;
      if (tangent.squaredNorm() > rg.squaredNorm()) rg = tangent;
    }
    grad_norm = rg.norm();
    if (grad_norm <= 1e-10) {
      r.converged = true;
      return r;
    }

    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      const Vec3 y_new = (r.y - step * rg).normalized();
      const MinEig e_new = min_eig(t, y_new);
      if (e_new.value <= r.eig.value - 1e-4 * step * grad_norm * grad_norm) {
        r.y = y_new;
        r.eig = e_new;
        step = std::min(2.0 * step, 4.0);
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No representable decrease left along the steepest direction.
      r.converged = grad_norm <= 1e-6;
      return r;
    }
  }
  r.converged = grad_norm <= 1e-6;
  return r;
}

inline bool same_direction(const Vec3& a, const Vec3& b, double angle) {
  return std::abs(a.dot(b)) >= std::cos(angle);
}

}  // namespace detail

/// Global search for the minimum of f(x (x) y) over unit x, y.
///
/// The form is normalized by its largest coefficient; tol applies to the
/// normalized values and reported values are in the original units.
inline Verdict certify(const QuadraticForm& f, const SearchConfig& cfg) {
  cfg.validate();
  Verdict out;
  const double scale = f.max_abs_coeff();
  if (scale == 0.0) {
    out.status = Verdict::Status::certified;
    out.zero_form = true;
    return out;
  }
  const AcousticMatrix t = acoustic_matrix((1.0 / scale) * f);
  const double tau = cfg.tol;

  const std::vector<Vec3> grid = fibonacci_sphere(cfg.grid_size);
  std::vector<double> values(grid.size());
  parallel_for(grid.size(), cfg.threads, [&](std::size_t i) { values[i] = min_eig(t, grid[i]).value; });

  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  if (values[order.front()] < -tau) {
    const MinEig e = min_eig(t, grid[order.front()]);
    out.status = Verdict::Status::violated;
    out.min_value = e.value * scale;
    out.x = e.vector;
    out.y = grid[order.front()];
    return out;
  }

  std::vector<Vec3> starts;
  for (std::size_t idx : order) {
    if (static_cast<int>(starts.size()) >= cfg.grid_starts) break;
    const bool near = std::any_of(starts.begin(), starts.end(), [&](const Vec3& s) {
      return detail::same_direction(s, grid[idx], 0.1);
    });
    if (!near) starts.push_back(grid[idx]);
  }
  // Axes, face diagonals and cube diagonals: exact zeros of symmetric forms
  // often sit there, where the landscape is too flat for descent to land on.
  for (const Vec3& d : symmetry_directions()) starts.push_back(d);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int k = 0; k < cfg.multistarts; ++k) {
    Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    if (v.norm() < 1e-12) v = Vec3::UnitZ();
    starts.push_back(v.normalized());
  }

  // Batches keep early exit on violation independent of the thread count:
  // the witness is always the lowest-index violating start.
  std::vector<detail::DescentResult> results(starts.size());
  const std::size_t batch = std::max<std::size_t>(resolve_threads(cfg.threads), 1);
  std::size_t done = 0;
  while (done < starts.size()) {
    const std::size_t hi = std::min(starts.size(), done + batch);
    parallel_for(hi - done, cfg.threads, [&](std::size_t i) {
      results[done + i] = detail::descend(t, starts[done + i], cfg.max_iter, -tau);
    });
    for (std::size_t i = done; i < hi; ++i) {
      if (results[i].eig.value < -tau) {
        out.status = Verdict::Status::violated;
        out.min_value = results[i].eig.value * scale;
        out.x = results[i].eig.vector;
        out.y = results[i].y;
        out.descents = static_cast<int>(i + 1);
        return out;
      }
    }
    done = hi;
  }

  out.descents = static_cast<int>(results.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].converged) ++out.not_converged;
    if (results[i].eig.value < results[best].eig.value) best = i;
  }
  out.min_value = results[best].eig.value * scale;
  out.x = results[best].eig.vector;
  out.y = results[best].y;
  if (results[best].eig.value > tau) {
    out.status = Verdict::Status::certified;
    return out;
  }

  out.status = Verdict::Status::marginal;
  std::vector<std::size_t> by_value(results.size());
  std::iota(by_value.begin(), by_value.end(), 0);
  std::stable_sort(by_value.begin(), by_value.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(results[a].eig.value) < std::abs(results[b].eig.value);
  });
  for (std::size_t idx : by_value) {
    const auto& r = results[idx];
    if (!r.converged || std::abs(r.eig.value) > tau) continue;
    std::vector<Vec3> xs{r.eig.vector};
    if (std::abs(r.eig.second) <= tau) {
      const SymEig3 e = eig_sym3(t(r.y));
      xs.push_back(e.vectors.col(1));
    }
    for (const Vec3& x : xs) {
      const Vec3 xc = canonical_sign(x), yc = canonical_sign(r.y);
      const bool dup = std::any_of(out.zero_points.begin(), out.zero_points.end(), [&](const ZeroPoint& z) {
        return detail::same_direction(z.x, xc, 1e-4) && detail::same_direction(z.y, yc, 1e-4);
      });
      if (!dup) out.zero_points.push_back({xc, yc, evaluate_rank_one(f, xc, yc)});
    }
  }
  return out;
}

/// Zero set of a rank-one convex form, clustered up to sign.
inline std::vector<ZeroPoint> zero_set(const QuadraticForm& f, const SearchConfig& cfg) {
  const Verdict v = certify(f, cfg);
  if (v.status == Verdict::Status::violated)
    throw std::invalid_argument("zero_set: form is not rank-one convex");
  return v.zero_points;
}

/// True when |y1| = |y2| = |y3| up to tol: the only zero directions the
/// closed-form determinant argument for the extremal form accounts for.
inline bool on_diagonal_family(const Vec3& y, double tol = 1e-6) {
  const Vec3 a = y.cwiseAbs();
  return std::abs(a(0) - a(1)) <= tol && std::abs(a(1) - a(2)) <= tol;
}

/// Points on the sphere from a cubed-sphere lattice: an (m+1)x(m+1) grid on
/// each cube face with m even, so the axes and the cube diagonals are nodes.
inline std::vector<Vec3> cubed_sphere(int n) {
  int m = 2;
  while (6 * (m + 3) * (m + 3) <= n) m += 2;
  std::vector<Vec3> pts;
  for (int axis = 0; axis < 3; ++axis)
    for (int sign : {-1, 1})
      for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= m; ++j) {
          Vec3 p;
          p(axis) = sign;
          p((axis + 1) % 3) = -1.0 + 2.0 * i / m;
          p((axis + 2) % 3) = -1.0 + 2.0 * j / m;
          pts.push_back(p.normalized());
        }
  return pts;
}

/// Reference minimum of f(x (x) y) over unit x, y: exhaustive over a
/// cubed-sphere lattice in y with the smallest eigenvalue of T(y) from an
/// iterative dense solver. No local search.
inline double brute_force_oracle(const QuadraticForm& f, int n) {
  if (n < 10) throw std::invalid_argument("brute_force_oracle: N must be >= 10");
  const AcousticMatrix t = acoustic_matrix(f);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& y : cubed_sphere(n)) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(t(y), Eigen::EigenvaluesOnly);
    best = std::min(best, es.eigenvalues()(0));
  }
  return best;
}

}  // namespace qcvx
