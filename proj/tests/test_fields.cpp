#include "qcvx/fields.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace qcvx;

namespace {

SpecialPotential sine_potential() {
  SpecialPotential sp;
  sp.v[0] = ScalarProfile::sine();
  return sp;
}

// u(x) written out componentwise with the sign pattern of each direction.
Vec3 potential_oracle(const SpecialPotential& sp, const Vec3& x) {
  const double v0 = sp.v[0].value(x(0) + x(1) + x(2));
  const double v1 = sp.v[1].value(-x(0) + x(1) + x(2));
  const double v2 = sp.v[2].value(x(0) - x(1) + x(2));
  const double v3 = sp.v[3].value(x(0) + x(1) - x(2));
  return Vec3(v0 - v1 + v2 + v3, v0 + v1 - v2 + v3, v0 + v1 + v2 - v3);
}

// Central differences of the potential, step small enough for 1e-7.
Mat3 numeric_gradient(const SpecialPotential& sp, const Vec3& x) {
  Mat3 g;
  const double h = 1e-5;
  for (int j = 0; j < 3; ++j) {
    Vec3 e = Vec3::Zero();
    e(j) = h;
    g.col(j) = (potential_oracle(sp, x + e) - potential_oracle(sp, x - e)) / (2 * h);
  }
  return g;
}

Mat3 displayed_gradient(double w0, double w1, double w2, double w3) {
  Mat3 e;
  const double s = w0 + w1 + w2 + w3;
  e << s, w0 - w1 - w2 + w3, w0 - w1 + w2 - w3, w0 - w1 - w2 + w3, s, w0 + w1 - w2 - w3, w0 - w1 + w2 - w3,
      w0 + w1 - w2 - w3, s;
  return e;
}

Mat3 displayed_flux(double w0, double w1, double w2, double w3) {
  Mat3 j;
  const double s = w0 + w1 + w2 + w3;
  j << -s, w0 - w1 - w2 + w3, 0, 0, -s, w0 + w1 - w2 - w3, w0 - w1 + w2 - w3, 0, -s;
  return j;
}

}  // namespace

TEST(Profile, PeriodicAndDerivative) {
  std::mt19937_64 rng(1);
  const ScalarProfile p = ScalarProfile::random(5, rng);
  for (double t : {-0.7, 0.0, 0.3, 1.9}) {
    EXPECT_NEAR(p.value(t + 2), p.value(t), 1e-12);
    const double h = 1e-5;
    EXPECT_NEAR(p.derivative(t), (p.value(t + h) - p.value(t - h)) / (2 * h), 1e-5);
    EXPECT_NEAR(p.second_derivative(t), (p.derivative(t + h) - p.derivative(t - h)) / (2 * h), 1e-4);
  }
  EXPECT_NEAR(ScalarProfile::sine().derivative(0.0), pi, 1e-15);
}

TEST(SpecialGradient, SineExample) {
  const SpecialPotential sp = sine_potential();
  EXPECT_LE((special_gradient(sp, Vec3::Zero()) - pi * Mat3::Ones()).cwiseAbs().maxCoeff(), 1e-14);
  Mat3 j;
  j << -1, 1, 0, 0, -1, 1, 1, 0, -1;
  EXPECT_LE((special_flux(sp, Vec3::Zero()) - pi * j).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(special_gradient(SpecialPotential{}, Vec3(0.1, 0.2, 0.3)), Mat3::Zero());
  EXPECT_EQ(special_flux(SpecialPotential{}, Vec3(0.1, 0.2, 0.3)), Mat3::Zero());
}

TEST(SpecialGradient, MatchesDisplayedMatricesAndNumericGradient) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 20; ++k) {
    const SpecialPotential sp = SpecialPotential::random(4, rng);
    for (int s = 0; s < 20; ++s) {
      const Vec3 x(u(rng), u(rng), u(rng));
      const double w0 = sp.v[0].derivative(x(0) + x(1) + x(2));
      const double w1 = sp.v[1].derivative(-x(0) + x(1) + x(2));
      const double w2 = sp.v[2].derivative(x(0) - x(1) + x(2));
      const double w3 = sp.v[3].derivative(x(0) + x(1) - x(2));
      const Mat3 e = special_gradient(sp, x);
      EXPECT_LE((e - displayed_gradient(w0, w1, w2, w3)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((special_flux(sp, x) - displayed_flux(w0, w1, w2, w3)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((e - numeric_gradient(sp, x)).cwiseAbs().maxCoeff(), 1e-5);
      EXPECT_LE((sp.potential(x) - potential_oracle(sp, x)).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LE((special_flux(sp, x) - flux(extremal_q(), MatrixVar(e))).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(SpecialGradient, SingleProfileIsPointwiseZero) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int m = 0; m < 4; ++m) {
    SpecialPotential sp;
    sp.v[m] = ScalarProfile::random(6, rng);
    for (int s = 0; s < 1000; ++s) {
      const Vec3 x(u(rng), u(rng), u(rng));
      EXPECT_LE(std::abs(extremal_q()(MatrixVar(special_gradient(sp, x)))), 1e-11);
    }
  }
}

TEST(SpecialGradient, MixedProfilesMatchClosedForm) {
  // Q(E) = 4 (sum w_m^2 - (sum w_m)^2): zero only on average for mixed profiles.
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int s = 0; s < 100; ++s) {
    const double w0 = u(rng), w1 = u(rng), w2 = u(rng), w3 = u(rng);
    const double sum = w0 + w1 + w2 + w3;
    const double expected = 4 * (w0 * w0 + w1 * w1 + w2 * w2 + w3 * w3 - sum * sum);
    EXPECT_NEAR(extremal_q()(MatrixVar(displayed_gradient(w0, w1, w2, w3))), expected, 1e-12);
  }
}

TEST(PeriodicField, FromSpecialReproducesGradient) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const SpecialPotential sp = SpecialPotential::random(5, rng);
  const PeriodicField f = PeriodicField::from_special(sp);
  for (int s = 0; s < 50; ++s) {
    const Vec3 x(u(rng), u(rng), u(rng));
    EXPECT_LE((f.gradient(x) - special_gradient(sp, x)).cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_LE((f.value(x) - sp.potential(x)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_TRUE(is_special(f));
}

TEST(CellAverage, SpecialFieldsVanish) {
  std::mt19937_64 rng(6);
  for (int k = 0; k < 20; ++k) {
    const PeriodicField f = PeriodicField::from_special(SpecialPotential::random(8, rng));
    EXPECT_LE(std::abs(cell_average_q(f, Backend::spectral)), 1e-10);
    EXPECT_LE(std::abs(cell_average_q(f, Backend::quadrature)), 1e-10);
  }
}

TEST(CellAverage, SingleModeExamples) {
  PeriodicField f(1);
  f.coeff(1, 1, 1) = CVec3(cplx(0.7, -0.2), cplx(0.7, -0.2), cplx(0.7, -0.2));
  f.make_real();
  EXPECT_NEAR(cell_average_q(f, Backend::spectral), 0.0, 1e-14);
  EXPECT_NEAR(cell_average_q(f, Backend::quadrature), 0.0, 1e-12);
  EXPECT_TRUE(is_special(f));

  // A mode outside the stated family that still has zero energy.
  PeriodicField g(1);
  g.coeff(1, 0, 0) = CVec3(0, 1, 0);
  g.make_real();
  EXPECT_NEAR(cell_average_q(g, Backend::spectral), 0.0, 1e-14);
  EXPECT_FALSE(is_special(g));

  std::mt19937_64 rng(7);
  EXPECT_FALSE(is_special(PeriodicField::random(2, rng)));
}

TEST(CellAverage, SpectralMatchesDirectQuadrature) {
  // Brute-force trapezoid average using PeriodicField::gradient pointwise.
  std::mt19937_64 rng(8);
  const PeriodicField f = PeriodicField::random(2, rng);
  const int n = 8;
  double sum = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        const Vec3 x(-1 + 2.0 * a / n, -1 + 2.0 * b / n, -1 + 2.0 * c / n);
        sum += extremal_q()(MatrixVar(f.gradient(x)));
      }
  const double direct = sum / (n * n * n);
  EXPECT_NEAR(cell_average_q(f, Backend::spectral), direct, 1e-10 * gradient_energy(f));
  EXPECT_NEAR(cell_average_q(f, Backend::quadrature, n), direct, 1e-10 * gradient_energy(f));
  EXPECT_THROW(cell_average_q_quadrature(f, 5), std::invalid_argument);
}

TEST(CellAverage, ParsevalNonnegativity) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> pick(1, 5);
  for (int k = 0; k < 100; ++k) {
    const PeriodicField f = PeriodicField::random(pick(rng), rng);
    const double s = cell_average_q(f, Backend::spectral);
    const double q = cell_average_q(f, Backend::quadrature);
    EXPECT_GE(s, -1e-10);
    EXPECT_GE(q, -1e-10);
    EXPECT_LE(std::abs(s - q), 1e-10 * std::max({std::abs(s), std::abs(q), 1e-300}));
  }
}

TEST(Divergence, SineProfile) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1, 1);
  const SpecialPotential sp = sine_potential();
  for (int k = 0; k < 20; ++k) {
    const Vec3 x(u(rng), u(rng), u(rng));
    EXPECT_LE(divergence_rows(sp, x, 1e-3).cwiseAbs().maxCoeff(), 1e-5);
  }
  EXPECT_EQ(divergence_rows(SpecialPotential{}, Vec3(0.2, 0.1, 0), 1e-3), Vec3::Zero());
  EXPECT_THROW(divergence_rows(sp, Vec3::Zero(), 0.0), std::invalid_argument);
}

TEST(Divergence, SecondOrder) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 10; ++k) {
    const SpecialPotential sp = SpecialPotential::random(8, rng);
    const DivergenceStudy s = divergence_study(sp, Vec3(u(rng), u(rng), u(rng)), 1e-3);
    EXPECT_NEAR(s.observed_order, 2.0, 0.05);
    EXPECT_LE(s.residual[0], 1e-5);
  }
}

TEST(Quadrature, GaussLegendreExactness) {
  for (int n : {1, 2, 5, 12}) {
    const auto [x, w] = gauss_legendre(n);
    ASSERT_EQ(static_cast<int>(x.size()), n);
    for (int d = 0; d <= 2 * n - 1; ++d) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += w[i] * std::pow(x[i], d);
      EXPECT_NEAR(s, d % 2 ? 0.0 : 2.0 / (d + 1), 1e-13);
    }
  }
}

TEST(Subdomain, RulesIntegrateKnownQuantities) {
  const Subdomain box = Subdomain::box(Vec3(0.1, -0.2, 0), Vec3(0.5, 0.3, 0.4));
  const Subdomain ball = Subdomain::ball(Vec3(0.1, 0, -0.1), 0.6);
  for (const Subdomain& d : {box, ball}) {
    double vol = 0.0, area = 0.0;
    Vec3 flux_x = Vec3::Zero();
    for (const auto& p : d.volume_rule(10)) {
      EXPECT_GT(p.w, 0.0);
      vol += p.w;
    }
    Mat3 div_id = Mat3::Zero();  // surface integral of x n^T equals volume * I
    for (const auto& p : d.surface_rule(10)) {
      EXPECT_GT(p.w, 0.0);
      area += p.w;
      div_id += p.w * p.x * p.normal.transpose();
      flux_x += p.w * p.normal;
    }
    EXPECT_NEAR(vol, d.volume(), 1e-12);
    EXPECT_LE((div_id - d.volume() * Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE(flux_x.norm(), 1e-12);
    (void)area;
  }
  EXPECT_THROW(Subdomain::box(Vec3(0.6, 0, 0), Vec3::Constant(0.5)), std::invalid_argument);
  EXPECT_THROW(Subdomain::ball(Vec3::Zero(), 1.0), std::invalid_argument);
}

TEST(Subdomain, CutoffVanishesOnBoundary) {
  const Subdomain box = Subdomain::box(Vec3::Zero(), Vec3::Constant(0.5));
  for (const auto& p : box.surface_rule(6)) {
    Vec3 g;
    EXPECT_EQ(box.cutoff(p.x, &g), 0.0);
    EXPECT_LE(g.norm(), 1e-15);
  }
  Vec3 g;
  const double h = 1e-6;
  const Vec3 x(0.1, -0.2, 0.3);
  box.cutoff(x, &g);
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e(i) = h;
    EXPECT_NEAR(g(i), (box.cutoff(x + e) - box.cutoff(x - e)) / (2 * h), 1e-7);
  }
}

TEST(Energy, InteriorEqualsBoundaryForSpecialPotential) {
  const Subdomain box = Subdomain::box(Vec3::Zero(), Vec3::Constant(0.5));
  const SpecialPotential sp = sine_potential();
  const double in = interior_energy(box, [&](const Vec3& x) { return special_gradient(sp, x); });
  EXPECT_NEAR(in, 0.0, 1e-8);
  EXPECT_NEAR(boundary_functional(box, sp), 0.0, 1e-8);

  std::mt19937_64 rng(12);
  for (const Subdomain& d : {box, Subdomain::ball(Vec3(0.1, 0.1, 0), 0.7)}) {
    const SpecialPotential r = SpecialPotential::random(2, rng);
    const double a = interior_energy(d, [&](const Vec3& x) { return special_gradient(r, x); }, 30);
    const double b = boundary_functional(d, r, 30);
    EXPECT_NEAR(a, b, 1e-8 * std::max(1.0, std::abs(b)));
  }

  const Mat3 e = Mat3::Ones();
  EXPECT_NEAR(interior_energy(box, [&](const Vec3&) { return e; }), 0.0, 1e-14);
}

TEST(SharpBound, Examples) {
  const Subdomain box = Subdomain::box(Vec3::Zero(), Vec3::Constant(0.5));
  const SpecialPotential sp = sine_potential();
  const SharpBoundReport zero = sharp_bound_check(box, sp, Perturbation{TrigField{}, 0.0});
  EXPECT_NEAR(zero.gap, 0.0, 1e-8);

  std::mt19937_64 rng(13);
  for (int k = 0; k < 10; ++k) {
    const SharpBoundReport r = sharp_bound_check(box, sp, Perturbation{TrigField::random(4, 2, rng), 1.0});
    EXPECT_GE(r.gap, -1e-8);
    EXPECT_LE(std::abs(r.cross), 1e-8);
    EXPECT_LE(std::abs(r.decomposition_residual), 1e-10);
  }

  TrigField lin;
  lin.linear(0, 0) = 1.0;
  const SharpBoundReport p = sharp_bound_check(box, sp, Perturbation{lin, 1e-2});
  EXPECT_GT(p.gap, 0.0);
  EXPECT_GT(p.perturbation, 0.0);
}

TEST(SharpBound, RandomPotentialAndBall) {
  std::mt19937_64 rng(14);
  const Subdomain ball = Subdomain::ball(Vec3(0, 0.1, 0), 0.6);
  const SpecialPotential sp = SpecialPotential::random(2, rng);
  const double scale = std::max(1.0, std::abs(boundary_functional(ball, sp, 30)));
  EXPECT_NEAR(sharp_bound_check(ball, sp, Perturbation{TrigField{}, 0.0}, 30).gap, 0.0, 1e-8 * scale);
  const SharpBoundReport r = sharp_bound_check(ball, sp, Perturbation{TrigField::random(3, 1, rng), 0.5}, 30);
  EXPECT_GE(r.gap, -1e-8 * scale);
}

TEST(SharpBound, RejectsNonvanishingPerturbation) {
  const Subdomain box = Subdomain::box(Vec3::Zero(), Vec3::Constant(0.5));
  TrigField c;
  c.modes.push_back({Vec3::Zero(), Vec3(1, 0, 0), Vec3::Zero()});
  Perturbation w{c, 1.0, Subdomain::box(Vec3::Zero(), Vec3::Constant(0.9))};
  EXPECT_THROW(sharp_bound_check(box, sine_potential(), w, 6), std::invalid_argument);
  w.support = Subdomain::box(Vec3::Zero(), Vec3::Constant(0.4));
  EXPECT_NO_THROW(sharp_bound_check(box, sine_potential(), w, 6));
}
