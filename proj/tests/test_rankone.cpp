#include "qcvx/rankone.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qcvx;

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  return Vec3(g(rng), g(rng), g(rng)).normalized();
}

// Expansion of det T(y) for Q from its explicit 3x3 matrix.
double q_det(const Vec3& y) {
  const double a = y(0) * y(0), b = y(1) * y(1), c = y(2) * y(2);
  return a * a * c + b * b * a + c * c * b - 3 * a * b * c;
}

// The sextic as usually printed, y1^4 y2^2 + y2^4 y3^2 + y3^4 y1^2 - 3 y1^2 y2^2 y3^2.
double printed_sextic(const Vec3& y) {
  const double a = y(0) * y(0), b = y(1) * y(1), c = y(2) * y(2);
  return a * a * b + b * b * c + c * c * a - 3 * a * b * c;
}

// Minimum of the cubic-family rank-one values from the closed-form T(y):
// eigenvalues along (1,1,1)-type and axis-type vectors are not general, so use
// a dense independent scan of x and y on the cubed-sphere lattice.
double dense_rank_one_min(const QuadraticForm& f, int n) {
  const auto pts = cubed_sphere(n);
  double best = std::numeric_limits<double>::infinity();
  for (const Vec3& y : pts)
    for (const Vec3& x : pts) best = std::min(best, evaluate_rank_one(f, x, y));
  return best;
}

SearchConfig fast() {
  SearchConfig c;
  c.grid_size = 2000;
  c.multistarts = 20;
  return c;
}

}  // namespace

TEST(MinEig, Examples) {
  const AcousticMatrix tq = acoustic_matrix(extremal_q());
  const MinEig a = min_eig(tq, Vec3(1, 1, 1).normalized());
  EXPECT_NEAR(a.value, 0.0, 1e-15);
  EXPECT_NEAR(std::abs(a.vector.dot(Vec3(1, 1, 1).normalized())), 1.0, 1e-12);
  const MinEig b = min_eig(tq, Vec3::UnitX());
  EXPECT_NEAR(b.value, 0.0, 1e-15);
  EXPECT_NEAR(std::abs(b.vector(1)), 1.0, 1e-12);
  const AcousticMatrix tf = acoustic_matrix(QuadraticForm::frobenius());
  std::mt19937_64 rng(1);
  for (int k = 0; k < 20; ++k) EXPECT_NEAR(min_eig(tf, random_unit(rng)).value, 1.0, 1e-12);
}

TEST(MinEig, Residual) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Mat9 m;
  for (int i = 0; i < 81; ++i) m(i / 9, i % 9) = g(rng);
  const AcousticMatrix t = acoustic_matrix(QuadraticForm(m));
  for (int k = 0; k < 1000; ++k) {
    const Vec3 y = random_unit(rng);
    const MinEig e = min_eig(t, y);
    EXPECT_NEAR(e.vector.norm(), 1.0, 1e-12);
    EXPECT_LE((t(y) * e.vector - e.value * e.vector).norm(), 1e-10);
  }
}

TEST(DetAcoustic, ExtremalSextic) {
  EXPECT_NEAR(det_acoustic(extremal_q(), Vec3(1, 1, 1)), 0.0, 1e-14);
  EXPECT_NEAR(det_acoustic(extremal_q(), Vec3(1, 0, 0)), 0.0, 1e-14);
  EXPECT_NEAR(det_acoustic(extremal_q(), Vec3(2, 1, 1)), 9.0, 1e-12);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int k = 0; k < 1000; ++k) {
    const Vec3 y(g(rng), g(rng), g(rng));
    const double ref = q_det(y);
    EXPECT_NEAR(det_acoustic(extremal_q(), y), ref, 1e-10 * std::max(1.0, std::abs(ref)) + 1e-13 * std::pow(y.norm(), 6));
  }
}

// Expanding the explicit T(y) gives the printed sextic with y1 and y2 exchanged.
TEST(DetAcoustic, PrintedSexticIsMirrored) {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g;
  double mismatch = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Vec3 y(g(rng), g(rng), g(rng));
    const double s = std::pow(y.norm(), 6);
    EXPECT_NEAR(det_acoustic(extremal_q(), y), printed_sextic(Vec3(y(1), y(0), y(2))), 1e-12 * s);
    mismatch = std::max(mismatch, std::abs(det_acoustic(extremal_q(), y) - printed_sextic(y)) / s);
  }
  EXPECT_GT(mismatch, 1e-3);
}

TEST(DetAcoustic, PrincipalMinors) {
  const AcousticMatrix t = acoustic_matrix(extremal_q());
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  for (int k = 0; k < 1000; ++k) {
    const Vec3 y(g(rng), g(rng), g(rng));
    const double a = y(0) * y(0), b = y(1) * y(1), c = y(2) * y(2);
    const Mat3 ty = t(y);
    auto minor = [&](int r) {
      const int i = (r + 1) % 3, j = (r + 2) % 3;
      const int lo = std::min(i, j), hi = std::max(i, j);
      return ty(lo, lo) * ty(hi, hi) - ty(lo, hi) * ty(hi, lo);
    };
    const double s = std::pow(y.norm(), 4);
    EXPECT_NEAR(minor(0), a * b + a * c + c * c, 1e-12 * s);
    EXPECT_NEAR(minor(1), a * b + b * c + a * a, 1e-12 * s);
    EXPECT_NEAR(minor(2), a * c + b * c + b * b, 1e-12 * s);
  }
}

TEST(DetAcoustic, NonnegativeOnSphere) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100000; ++k) EXPECT_GE(det_acoustic(extremal_q(), random_unit(rng)), -1e-12);
}

TEST(Certify, ExtremalIsMarginal) {
  const Verdict v = certify(extremal_q(), SearchConfig{});
  EXPECT_EQ(v.status, Verdict::Status::marginal);
  EXPECT_GE(v.min_value, -1e-9);
  EXPECT_LE(v.min_value, 1e-7);
  const Vec3 d = Vec3(1, 1, 1).normalized();
  bool diag = false, axis = false;
  for (const ZeroPoint& z : v.zero_points) {
    EXPECT_NEAR(z.x.norm(), 1.0, 1e-12);
    EXPECT_NEAR(z.y.norm(), 1.0, 1e-12);
    EXPECT_LE(std::abs(evaluate_rank_one(extremal_q(), z.x, z.y)), 1e-9);
    if (std::abs(z.y.dot(d)) >= std::cos(1e-4) && std::abs(z.x.dot(d)) >= std::cos(1e-4)) diag = true;
    if (std::abs(z.x(1)) > 1 - 1e-12 && std::abs(z.y(0)) > 1 - 1e-12) axis = true;
  }
  EXPECT_TRUE(diag);
  EXPECT_TRUE(axis);
}

TEST(Certify, ZeroSetFamilies) {
  const auto zs = zero_set(extremal_q(), SearchConfig{});
  // The diagonal-type representatives: y and x both along one (+-1,1,1) line.
  int families = 0;
  for (const Vec3& k : {Vec3(1, 1, 1), Vec3(-1, 1, 1), Vec3(1, -1, 1), Vec3(1, 1, -1)}) {
    const Vec3 d = k.normalized();
    for (const ZeroPoint& z : zs)
      if (std::abs(z.y.dot(d)) > 1 - 1e-8 && std::abs(z.x.dot(d)) > 1 - 1e-8) {
        ++families;
        break;
      }
  }
  EXPECT_EQ(families, 4);
  for (const ZeroPoint& z : zs)
    if (on_diagonal_family(z.y)) {
      EXPECT_TRUE(on_diagonal_family(z.x, 1e-4));
    }
  EXPECT_TRUE(zero_set(QuadraticForm::frobenius(), fast()).empty());
}

TEST(Certify, ViolatedAndCertified) {
  const Verdict bad = certify(from_cubic({1, 2, 0}), fast());
  EXPECT_EQ(bad.status, Verdict::Status::violated);
  EXPECT_LT(bad.min_value, -1e-9);
  EXPECT_NEAR(evaluate_rank_one(from_cubic({1, 2, 0}), bad.x, bad.y), bad.min_value, 1e-12);

  const Verdict good = certify(QuadraticForm::frobenius(), fast());
  EXPECT_EQ(good.status, Verdict::Status::certified);
  EXPECT_NEAR(good.min_value, 1.0, 1e-12);

  const Verdict zero = certify(QuadraticForm::zero(), fast());
  EXPECT_EQ(zero.status, Verdict::Status::certified);
  EXPECT_TRUE(zero.zero_form);
  EXPECT_THROW(zero_set(from_cubic({1, 2, 0}), fast()), std::invalid_argument);
}

TEST(Certify, ScaleInvariantVerdict) {
  for (double s : {1e-6, 1.0, 1e6}) {
    EXPECT_EQ(certify(s * extremal_q(), fast()).status, Verdict::Status::marginal);
    EXPECT_EQ(certify(s * from_cubic({1, 2, 0}), fast()).status, Verdict::Status::violated);
  }
}

TEST(Certify, Deterministic) {
  SearchConfig c = fast();
  c.seed = 77;
  const Verdict a = certify(extremal_q(), c);
  c.threads = 4;
  const Verdict b = certify(extremal_q(), c);
  EXPECT_EQ(a.min_value, b.min_value);
  ASSERT_EQ(a.zero_points.size(), b.zero_points.size());
  for (std::size_t i = 0; i < a.zero_points.size(); ++i) {
    EXPECT_EQ(a.zero_points[i].x, b.zero_points[i].x);
    EXPECT_EQ(a.zero_points[i].y, b.zero_points[i].y);
  }
}

TEST(Certify, RejectsBadConfig) {
  SearchConfig c;
  c.grid_size = 11;
  EXPECT_THROW(certify(extremal_q(), c), std::invalid_argument);
  c = SearchConfig{};
  c.tol = 0.0;
  EXPECT_THROW(certify(extremal_q(), c), std::invalid_argument);
}

TEST(Oracle, Examples) {
  const double q = brute_force_oracle(extremal_q(), 2000);
  EXPECT_GE(q, -1e-9);
  EXPECT_LE(q, 1e-6);
  QuadraticForm sub = from_cyclic({1, -2, 1, 0});
  Mat9 e = Mat9::Zero();
  e(0, 0) = 0.1;
  EXPECT_LT(brute_force_oracle(sub - QuadraticForm(e), 2000), 0.0);
  EXPECT_EQ(brute_force_oracle(QuadraticForm::zero(), 50), 0.0);
  EXPECT_THROW(brute_force_oracle(extremal_q(), 9), std::invalid_argument);
}

TEST(Oracle, AgreesWithCertifyOnCubicFamily) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2, 2);
  int compared = 0;
  while (compared < 50) {
    const CubicParams p{u(rng), u(rng), u(rng)};
    const QuadraticForm f = from_cubic(p);
    const double oracle = brute_force_oracle(f, 2000);
    if (std::abs(oracle) <= 1e-4) continue;
    ++compared;
    const Verdict v = certify(f, fast());
    EXPECT_EQ(v.status == Verdict::Status::violated, oracle < 0) << p.alpha << " " << p.beta << " " << p.gamma;
  }
}

TEST(Oracle, IndependentDenseScan) {
  // x and y both from the lattice, no eigen solver involved.
  EXPECT_GE(dense_rank_one_min(extremal_q(), 8), -1e-12);
  EXPECT_LT(dense_rank_one_min(from_cubic({1, 2, 0}), 8), -0.1);
}
