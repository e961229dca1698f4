#pragma once

// Extremality probe (can a rank-one square be subtracted while keeping rank-one
// convexity?) and rank-one equivalence transforms f(x, y) = g(A x, B y).

#include "qcvx/forms.hpp"
#include "qcvx/parallel.hpp"
#include "qcvx/rankone.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace qcvx {

/// R(xi) = (a^T xi b)^2, so that R(x (x) y) = (a.x)^2 (b.y)^2.
struct RankOneDirection {
  Vec3 a = Vec3::UnitX();
  Vec3 b = Vec3::UnitX();

  RankOneDirection() = default;
  RankOneDirection(const Vec3& a_in, const Vec3& b_in) : a(a_in.normalized()), b(b_in.normalized()) {
    if (a_in.norm() == 0.0 || b_in.norm() == 0.0)
      throw std::invalid_argument("RankOneDirection: zero vector");
  }

  QuadraticForm form() const {
    const Vec9 w = MatrixVar::outer(a, b).coords();
    return QuadraticForm(Mat9(w * w.transpose()));
  }
};

struct DirectionProbe {
  RankOneDirection direction;
  double t_star = 0.0;
  bool zero_aligned = false;
};

struct ProbeReport {
  int directions = 0;
  double sup_t = 0.0;
  RankOneDirection worst;
  // Subtraction-based extremality only: no rank-one square could be taken away in any
  // probed direction. Evidence, not a proof.
  bool extremal_def1 = false;
  std::vector<DirectionProbe> per_direction;
};

inline constexpr double kProbeResolution = 1e-6;
inline constexpr double kProbeCap = 1e6;

/// Largest t with f - t R still rank-one convex, by bisection against certify.
inline double max_subtractable(const QuadraticForm& f, const RankOneDirection& d, const SearchConfig& cfg,
                               bool check_input = true) {
  if (check_input && certify(f, cfg).status == Verdict::Status::violated)
    throw std::invalid_argument("max_subtractable: form is not rank-one convex");
  const QuadraticForm r = d.form();
  auto violated = [&](double t) { return certify(f - t * r, cfg).status == Verdict::Status::violated; };

  if (violated(kProbeResolution)) return 0.0;
  double lo = kProbeResolution, hi = 1.0;
  while (!violated(hi)) {
    lo = hi;
    hi *= 2.0;
    if (hi > kProbeCap) return kProbeCap;
  }
  while (hi - lo > kProbeResolution) {
    const double mid = 0.5 * (lo + hi);
    (violated(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

inline ProbeReport probe_def1(const QuadraticForm& f, int n_directions, const SearchConfig& cfg) {
  const Verdict base = certify(f, cfg);
  if (base.status == Verdict::Status::violated)
    throw std::invalid_argument("probe_def1: form is not rank-one convex");

  std::vector<DirectionProbe> probes;
  for (const ZeroPoint& z : base.zero_points) probes.push_back({RankOneDirection(z.x, z.y), 0.0, true});
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto random_unit = [&] {
    Vec3 v(gauss(rng), gauss(rng), gauss(rng));
    return v.norm() < 1e-12 ? Vec3(Vec3::UnitX()) : Vec3(v.normalized());
  };
  for (int k = 0; k < n_directions; ++k) {
    const Vec3 a = random_unit();
    const Vec3 b = random_unit();
    probes.push_back({RankOneDirection(a, b), 0.0, false});
  }

  SearchConfig inner = cfg;
  inner.threads = 1;
  parallel_for(probes.size(), cfg.threads, [&](std::size_t i) {
    probes[i].t_star = max_subtractable(f, probes[i].direction, inner, false);
  });

  ProbeReport out;
  out.directions = static_cast<int>(probes.size());
  std::size_t worst = 0;
  for (std::size_t i = 0; i < probes.size(); ++i)
    if (probes[i].t_star > probes[worst].t_star) worst = i;
  if (!probes.empty()) {
    out.sup_t = probes[worst].t_star;
    out.worst = probes[worst].direction;
  }

  // Local refinement of a positive supremum by random perturbation.
  if (out.sup_t > kProbeResolution) {
    double sigma = 0.3;
    for (int it = 0; it < 12 && sigma > 1e-3; ++it) {
      const RankOneDirection trial(out.worst.a + sigma * random_unit(), out.worst.b + sigma * random_unit());
      const double t = max_subtractable(f, trial, inner, false);
      if (t > out.sup_t) {
        out.sup_t = t;
        out.worst = trial;
        probes.push_back({trial, t, false});
      } else {
        sigma *= 0.5;
      }
    }
  }
  out.extremal_def1 = out.sup_t <= kProbeResolution;
  out.per_direction = std::move(probes);
  return out;
}

/// Pair of nonsingular maps (A, B) acting as (x, y) -> (A x, B y).
struct EquivalenceMap {
  Mat3 a = Mat3::Identity();
  Mat3 b = Mat3::Identity();

  EquivalenceMap() = default;
  EquivalenceMap(const Mat3& a_in, const Mat3& b_in) : a(a_in), b(b_in) {
    if (std::abs(a.determinant()) < 1e-12 || std::abs(b.determinant()) < 1e-12)
      throw std::invalid_argument("EquivalenceMap: singular map");
  }

  EquivalenceMap inverse() const { return {a.inverse(), b.inverse()}; }

  // transform(transform(B, first), second) == transform(B, first.then(second))
  EquivalenceMap then(const EquivalenceMap& second) const { return {a * second.a, b * second.b}; }
};

/// The biquadratic (x, y) -> bq(A x, B y).
inline Biquadratic transform(const Biquadratic& bq, const EquivalenceMap& m) {
  return bq.composed_with(m.a, m.b);
}

/// Diagonal map x_i -> lambda_i x_i, y_i -> y_i / lambda_i carrying
/// corollary_q(alpha, beta, gamma) to corollary_q(alpha', beta', gamma').
///
/// Solves alpha l1^2/l2^2 = alpha', beta l2^2/l3^2 = beta', gamma l3^2/l1^2 =
/// gamma' in logarithms, normalized by l1 l2 l3 = 1. Requires equal products.
inline EquivalenceMap diagonal_scaling(double alpha, double beta, double gamma, double alpha_p,
                                       double beta_p, double gamma_p) {
  for (double v : {alpha, beta, gamma, alpha_p, beta_p, gamma_p})
    if (!(v > 0.0)) throw std::invalid_argument("diagonal_scaling: parameters must be positive");
  const double prod = alpha * beta * gamma, prod_p = alpha_p * beta_p * gamma_p;
  if (std::abs(prod - prod_p) > 1e-9 * prod)
    throw std::invalid_argument("diagonal_scaling: requires alpha*beta*gamma == alpha'*beta'*gamma' (" +
                                std::to_string(prod) + " vs " + std::to_string(prod_p) + ")");
  // mu_i = log lambda_i: mu1 - mu2 = s, mu2 - mu3 = t, mu1 + mu2 + mu3 = 0.
  const double s = 0.5 * std::log(alpha_p / alpha);
  const double t = 0.5 * std::log(beta_p / beta);
  const double mu2 = (t - s) / 3.0;
  const Vec3 lambda(std::exp(mu2 + s), std::exp(mu2), std::exp(mu2 - t));
  return {Mat3(lambda.asDiagonal()), Mat3(lambda.cwiseInverse().asDiagonal())};
}

}  // namespace qcvx
