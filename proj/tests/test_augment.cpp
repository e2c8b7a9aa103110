#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "demri/augment.hpp"
#include "support/generators.hpp"

using namespace demri;
using namespace demri::augment;

namespace {

Image random_image(gen::Rng& rng, std::size_t nx, std::size_t ny) {
  std::uniform_real_distribution<double> u(-10, 10);
  Image img(nx, ny, 0.0);
  for (auto& v : img.values()) v = u(rng);
  return img;
}

ProbabilityMap random_onehot(gen::Rng& rng, std::size_t pixels, std::size_t classes) {
  std::uniform_int_distribution<int> c(0, static_cast<int>(classes) - 1);
  std::vector<int> labels(pixels);
  for (auto& l : labels) l = c(rng);
  return ProbabilityMap::one_hot(labels, classes);
}

BinaryMask random_blob(gen::Rng& rng, std::size_t n) {
  std::uniform_int_distribution<long> centre(10, static_cast<long>(n) - 11);
  std::uniform_real_distribution<double> radius(1.5, 6.0);
  const long cx = centre(rng), cy = centre(rng);
  const double r = radius(rng);
  BinaryMask m(n, n, 0);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x)
      if (std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy) <= r) m(x, y) = 1;
  return m;
}

Matrix3 identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

void expect_matrix_near(const Matrix3& a, const Matrix3& b, double tol) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(a[r][c], b[r][c], tol) << "entry " << r << "," << c;
}

}  // namespace

TEST(Mixup, LambdaOneAndZero) {
  gen::Rng rng(31);
  const auto xi = random_image(rng, 6, 5), xj = random_image(rng, 6, 5);
  const auto yi = random_onehot(rng, 30, 3), yj = random_onehot(rng, 30, 3);
  const auto one = mixup(xi, xj, yi, yj, 1.0);
  EXPECT_EQ(one.x, xi);
  EXPECT_EQ(one.y, yi);
  const auto zero = mixup(xi, xj, yi, yj, 0.0);
  EXPECT_EQ(zero.x, xj);
  EXPECT_EQ(zero.y, yj);
}

TEST(Mixup, HalfwayIsAverage) {
  Image a(3, 3, 0.0), b(3, 3, 2.0);
  const auto y = ProbabilityMap::one_hot(std::vector<int>(9, 0), 2);
  const auto m = mixup(a, b, y, y, 0.5);
  for (double v : m.x.values()) EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Mixup, EnvelopeAndSimplex) {
  gen::Rng rng(32);
  std::uniform_real_distribution<double> lam(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto xi = random_image(rng, 5, 4), xj = random_image(rng, 5, 4);
    const auto yi = random_onehot(rng, 20, 5), yj = random_onehot(rng, 20, 5);
    const auto m = mixup(xi, xj, yi, yj, lam(rng));
    for (std::size_t k = 0; k < xi.size(); ++k) {
      const double lo = std::min(xi.values()[k], xj.values()[k]);
      const double hi = std::max(xi.values()[k], xj.values()[k]);
      EXPECT_GE(m.x.values()[k], lo - 1e-12);
      EXPECT_LE(m.x.values()[k], hi + 1e-12);
    }
    EXPECT_TRUE(m.y.is_simplex(1e-12));
  }
}

TEST(Mixup, RejectsBadInput) {
  Image a(3, 3, 0.0), b(3, 2, 0.0);
  const auto y = ProbabilityMap::one_hot(std::vector<int>(9, 0), 2);
  EXPECT_THROW(mixup(a, a, y, y, 1.5), ArgumentError);
  EXPECT_THROW(mixup(a, b, y, y, 0.5), ArgumentError);
}

TEST(SampleLambda, RangeAndReproducibility) {
  gen::Rng a(33), b(33);
  double sum = 0;
  for (int i = 0; i < 4000; ++i) {
    const double la = sample_lambda(a);
    EXPECT_EQ(la, sample_lambda(b));
    EXPECT_GE(la, 0.0);
    EXPECT_LE(la, 1.0);
    sum += la;
  }
  EXPECT_NEAR(sum / 4000, 0.5, 0.03);  // Beta(a, a) is symmetric
}

TEST(ForegroundAffine, IdenticalMasksGiveIdentity) {
  gen::Rng rng(34);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = random_blob(rng, 32);
    const auto p = foreground_affine(m, m);
    EXPECT_EQ(p.scale, 1.0);
    expect_matrix_near(p.transform, identity(), 0.0);
  }
}

TEST(ForegroundAffine, ScaleAndCentroidExample) {
  BinaryMask mi(40, 40, 0), mj(40, 40, 0);
  for (auto [dx, dy] : {std::pair{5, 0}, {-5, 0}, {0, 5}, {0, -5}}) mi(10 + dx, 10 + dy) = 1;
  for (auto [dx, dy] : {std::pair{10, 0}, {-10, 0}, {0, 10}, {0, -10}}) mj(20 + dx, 20 + dy) = 1;
  const auto p = foreground_affine(mi, mj);
  EXPECT_DOUBLE_EQ(p.spread_i, 5.0);
  EXPECT_DOUBLE_EQ(p.spread_j, 10.0);
  EXPECT_DOUBLE_EQ(p.scale, 0.5);
  expect_matrix_near(p.transform, {{{0.5, 0, 0}, {0, 0.5, 0}, {0, 0, 1}}}, 1e-15);
}

TEST(ForegroundAffine, TranslatedMask) {
  gen::Rng rng(35);
  const auto mi = random_blob(rng, 40);
  BinaryMask mj(40, 40, 0);
  for (std::size_t y = 0; y < 40; ++y)
    for (std::size_t x = 0; x + 4 < 40; ++x) mj(x + 4, y) = mi(x, y);
  const auto p = foreground_affine(mi, mj);
  EXPECT_NEAR(p.scale, 1.0, 1e-12);
  expect_matrix_near(p.transform, {{{1, 0, -4}, {0, 1, 0}, {0, 0, 1}}}, 1e-12);
}

TEST(ForegroundAffine, MapsCentroidJOntoCentroidI) {
  gen::Rng rng(36);
  for (int trial = 0; trial < 50; ++trial) {
    const auto mi = random_blob(rng, 32), mj = random_blob(rng, 32);
    const auto p = foreground_affine(mi, mj);
    const auto& t = p.transform;
    EXPECT_NEAR(t[0][0] * p.centroid_j.x + t[0][2], p.centroid_i.x, 1e-12);
    EXPECT_NEAR(t[1][1] * p.centroid_j.y + t[1][2], p.centroid_i.y, 1e-12);
  }
}

TEST(ForegroundAffine, DegenerateInputs) {
  BinaryMask empty(8, 8, 0), dot(8, 8, 0), blob(8, 8, 0);
  dot(3, 3) = 1;
  blob(3, 3) = blob(4, 3) = 1;
  EXPECT_THROW(foreground_affine(empty, dot), DegenerateForegroundError);
  EXPECT_THROW(foreground_affine(dot, blob), DegenerateForegroundError);
  BinaryMask dot2(8, 8, 0);
  dot2(5, 6) = 1;
  const auto p = foreground_affine(dot, dot2);
  EXPECT_EQ(p.scale, 1.0);
  expect_matrix_near(p.transform, {{{1, 0, -2}, {0, 1, -3}, {0, 0, 1}}}, 0.0);
}

TEST(ForegroundMask, CavityAndWall) {
  const auto labels = Plane<Tissue>::from_rows(
      {{Tissue::background, Tissue::cavity}, {Tissue::pmo, Tissue::myocardium}});
  const auto m = foreground_mask(labels);
  EXPECT_EQ(m(0, 0), 0);
  EXPECT_EQ(m(1, 0), 1);
  EXPECT_EQ(m(0, 1), 1);
  EXPECT_EQ(m(1, 1), 1);
}

TEST(AffineMixup, IdentityReducesToMixup) {
  gen::Rng rng(37);
  const auto mask = random_blob(rng, 24);
  const auto xi = random_image(rng, 24, 24), xj = random_image(rng, 24, 24);
  const auto yi = random_onehot(rng, 576, 3), yj = random_onehot(rng, 576, 3);
  const auto a = affine_mixup(xi, xj, yi, yj, mask, mask, 0.3);
  const auto b = mixup(xi, xj, yi, yj, 0.3);
  for (std::size_t k = 0; k < xi.size(); ++k) EXPECT_NEAR(a.x.values()[k], b.x.values()[k], 1e-12);
  EXPECT_EQ(a.y, b.y);
}

TEST(AffineMixup, LambdaOneReturnsFirstSample) {
  gen::Rng rng(38);
  const auto mi = random_blob(rng, 24), mj = random_blob(rng, 24);
  const auto xi = random_image(rng, 24, 24), xj = random_image(rng, 24, 24);
  const auto yi = random_onehot(rng, 576, 3), yj = random_onehot(rng, 576, 3);
  const auto a = affine_mixup(xi, xj, yi, yj, mi, mj, 1.0);
  EXPECT_EQ(a.x, xi);
  EXPECT_EQ(a.y, yi);
}

TEST(AffineMixup, TranslatedCopyRealigns) {
  gen::Rng rng(39);
  const std::size_t n = 32;
  const long shift_x = 3, shift_y = -2;
  const auto mi = random_blob(rng, n);
  const auto xi = random_image(rng, n, n);
  Image xj(n, n, 0.0);
  BinaryMask mj(n, n, 0);
  for (long y = 0; y < static_cast<long>(n); ++y)
    for (long x = 0; x < static_cast<long>(n); ++x) {
      const long sx = x - shift_x, sy = y - shift_y;
      if (sx < 0 || sy < 0 || sx >= static_cast<long>(n) || sy >= static_cast<long>(n)) continue;
      xj(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = xi(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy));
      mj(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = mi(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy));
    }
  const auto y = random_onehot(rng, n * n, 2);
  const auto out = affine_mixup(xi, xj, y, y, mi, mj, 0.0);
  for (std::size_t yy = 4; yy + 4 < n; ++yy)
    for (std::size_t xx = 4; xx + 4 < n; ++xx) EXPECT_NEAR(out.x(xx, yy), xi(xx, yy), 1e-6);
}

TEST(AffineMixup, LabelsStaySimplex) {
  gen::Rng rng(40);
  std::uniform_real_distribution<double> lam(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto mi = random_blob(rng, 24), mj = random_blob(rng, 24);
    const auto xi = random_image(rng, 24, 24), xj = random_image(rng, 24, 24);
    const auto yi = random_onehot(rng, 576, 4), yj = random_onehot(rng, 576, 4);
    EXPECT_TRUE(affine_mixup(xi, xj, yi, yj, mi, mj, lam(rng)).y.is_simplex(1e-12));
  }
}

TEST(RotateFlip, QuarterTurnExample) {
  const auto p = Plane<int>::from_rows({{1, 2}, {3, 4}});
  EXPECT_EQ(rotate_flip(p, 1), Plane<int>::from_rows({{3, 1}, {4, 2}}));
}

TEST(RotateFlip, IdentitiesAndInvolutions) {
  gen::Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto img = random_image(rng, 5, 3);
    EXPECT_EQ(rotate_flip(img, 0), img);
    EXPECT_EQ(rotate_flip(rotate_flip(img, 2), 2), img);
    EXPECT_EQ(rotate_flip(rotate_flip(rotate_flip(rotate_flip(img, 1), 1), 1), 1), img);
    EXPECT_EQ(rotate_flip(rotate_flip(img, 0, FlipAxis::x), 0, FlipAxis::x), img);
    EXPECT_EQ(rotate_flip(rotate_flip(img, 0, FlipAxis::y), 0, FlipAxis::y), img);
    // Two flips make a half turn.
    EXPECT_EQ(flip(flip(img, FlipAxis::x), FlipAxis::y), rotate_flip(img, 2));
  }
}

TEST(RotateFlip, GridSwapsExtentsAndSpacing) {
  gen::Rng rng(42);
  const auto m = gen::random_labelmap(rng, {5, 3, 2}, {1.0, 2.0, 10.0});
  const auto r = rotate_flip(m, 1, FlipAxis::y);
  EXPECT_EQ(r.extents(), (Extents{3, 5, 2}));
  EXPECT_EQ(r.spacing().x, 2.0);
  EXPECT_EQ(r.spacing().y, 1.0);
  EXPECT_EQ(tissue_histogram(r), tissue_histogram(m));
  EXPECT_THROW(rotate_flip(m, 4), ArgumentError);
}
