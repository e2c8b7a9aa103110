#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "demri/augment.hpp"
#include "demri/diagnostics.hpp"
#include "demri/metrics.hpp"
#include "demri/neuralref.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace demri;
using namespace demri::metrics;

namespace {

Mask3D mask_with(Extents e, std::initializer_list<std::array<std::size_t, 3>> voxels, Spacing s = {1, 1, 1}) {
  Mask3D m(e, s, std::uint8_t{0});
  for (const auto& v : voxels) m(v[0], v[1], v[2]) = 1;
  return m;
}

// Blocky random map: a few random boxes of each tissue so regions have interiors.
LabelMap blocky_map(gen::Rng& rng, Extents e, Spacing s) {
  LabelMap m(e, s, Tissue::background);
  std::uniform_int_distribution<int> code(1, 4);
  std::uniform_int_distribution<std::size_t> px(0, e.nx - 1), py(0, e.ny - 1), pz(0, e.nz - 1), len(1, 4);
  for (int b = 0; b < 8; ++b) {
    const auto t = static_cast<Tissue>(code(rng));
    const std::size_t x0 = px(rng), y0 = py(rng), z0 = pz(rng), w = len(rng), h = len(rng), d = len(rng);
    for (std::size_t z = z0; z < std::min(e.nz, z0 + d); ++z)
      for (std::size_t y = y0; y < std::min(e.ny, y0 + h); ++y)
        for (std::size_t x = x0; x < std::min(e.nx, x0 + w); ++x) m(x, y, z) = t;
  }
  return m;
}

double pim_oracle(const LabelMap& m, std::initializer_list<Tissue> scar) {
  std::size_t wall = 0, hit = 0;
  for (Tissue t : m.values()) {
    if (t == Tissue::myocardium || t == Tissue::infarct || t == Tissue::pmo) ++wall;
    for (Tissue s : scar) hit += t == s;
  }
  return wall ? 100.0 * static_cast<double>(hit) / static_cast<double>(wall) : 0.0;
}

}  // namespace

TEST(Dice, Examples) {
  const Extents e{4, 4, 1};
  const auto a = mask_with(e, {{{0, 0, 0}}, {{1, 0, 0}}, {{2, 0, 0}}, {{3, 0, 0}}});
  const auto b = mask_with(e, {{{2, 0, 0}}, {{3, 0, 0}}, {{0, 1, 0}}, {{1, 1, 0}}});
  const auto c = mask_with(e, {{{0, 3, 0}}});
  EXPECT_EQ(dice(a, a), 1.0);
  EXPECT_EQ(dice(a, c), 0.0);
  EXPECT_EQ(dice(a, b), 0.5);
  const Mask3D empty(e, {1, 1, 1}, std::uint8_t{0});
  EXPECT_EQ(dice(empty, empty), 1.0);
  EXPECT_EQ(dice(empty, a), 0.0);
  EXPECT_THROW(dice(a, Mask3D({4, 3, 1}, {1, 1, 1}, std::uint8_t{0})), GeometryError);
}

TEST(Dice, MatchesOracleAndSymmetric) {
  gen::Rng rng(91);
  std::uniform_real_distribution<double> density(0.0, 0.8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = gen::random_mask(rng, {7, 6, 3}, density(rng));
    const auto b = gen::random_mask(rng, {7, 6, 3}, density(rng));
    EXPECT_DOUBLE_EQ(dice(a, b), oracle::dice(a, b));
    EXPECT_EQ(dice(a, b), dice(b, a));
  }
}

TEST(Hausdorff, Examples) {
  const Extents e{8, 8, 2};
  const auto a = mask_with(e, {{{1, 1, 0}}});
  const auto b = mask_with(e, {{{4, 5, 0}}});
  EXPECT_EQ(hausdorff3d(a, a, {1, 1, 1}).mm, 0.0);
  EXPECT_DOUBLE_EQ(hausdorff3d(a, b, {1, 1, 1}).mm, 5.0);
  EXPECT_DOUBLE_EQ(hausdorff3d(a, b, {2, 1, 1}).mm, std::hypot(6.0, 4.0));
}

TEST(Hausdorff, EmptyMaskSentinel) {
  const Extents e{4, 5, 2};
  const auto a = mask_with(e, {{{1, 1, 0}}});
  const Mask3D empty(e, {1, 1, 1}, std::uint8_t{0});
  ScopedWarningCapture capture;
  const auto r = hausdorff3d(a, empty, {2, 2, 10});
  EXPECT_TRUE(r.sentinel);
  EXPECT_DOUBLE_EQ(r.mm, std::sqrt(8.0 * 8.0 + 10.0 * 10.0 + 20.0 * 20.0));
  EXPECT_FALSE(capture.messages().empty());
  const auto both = hausdorff3d(empty, empty, {1, 1, 1});
  EXPECT_EQ(both.mm, 0.0);
  EXPECT_FALSE(both.sentinel);
}

TEST(Hausdorff, MatchesExhaustiveOracle) {
  gen::Rng rng(92);
  std::uniform_real_distribution<double> density(0.05, 0.7);
  for (int trial = 0; trial < 200; ++trial) {
    const Spacing s = gen::random_spacing(rng);
    const auto a = gen::random_mask(rng, {8, 8, 3}, density(rng), s);
    const auto b = gen::random_mask(rng, {8, 8, 3}, density(rng), s);
    const double want = oracle::hausdorff(a, b, s);
    if (want < 0) continue;
    const auto got = hausdorff3d(a, b, s);
    EXPECT_NEAR(got.mm, want, 1e-9) << "trial " << trial;
    EXPECT_DOUBLE_EQ(got.mm, hausdorff3d(b, a, s).mm);
  }
}

TEST(Hausdorff, InvariantUnderSharedRotation) {
  gen::Rng rng(93);
  std::uniform_int_distribution<int> k(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const Spacing s = gen::random_spacing(rng);
    const auto a = gen::random_mask(rng, {9, 6, 3}, 0.3, s);
    const auto b = gen::random_mask(rng, {9, 6, 3}, 0.3, s);
    const int turns = k(rng);
    const auto ra = augment::rotate_flip(a, turns, augment::FlipAxis::x);
    const auto rb = augment::rotate_flip(b, turns, augment::FlipAxis::x);
    EXPECT_NEAR(hausdorff3d(ra, rb, ra.spacing()).mm, hausdorff3d(a, b, s).mm, 1e-9);
    EXPECT_DOUBLE_EQ(dice(ra, rb), dice(a, b));
  }
}

TEST(Volume, Examples) {
  Mask3D m({10, 1, 1}, {2, 2, 10}, std::uint8_t{1});
  EXPECT_NEAR(volume_cm3(m, m.spacing()), 0.4, 1e-12);
  EXPECT_EQ(volume_cm3(Mask3D({3, 3, 3}, {1, 1, 1}, std::uint8_t{0}), {1, 1, 1}), 0.0);
}

TEST(Volume, MyocardiumScaleOfCohort) {
  // 2400 voxels at 2 x 2 x 10 mm is 96 cm3, the order of the cohort's mean myocardial volume (96.32 cm3).
  Mask3D m({40, 60, 1}, {2, 2, 10}, std::uint8_t{1});
  EXPECT_NEAR(volume_cm3(m, m.spacing()), 96.0, 1e-9);
  EXPECT_NEAR(volume_cm3(m, m.spacing()), 96.32, 22.07);
}

TEST(Pim, Examples) {
  LabelMap m({10, 10, 1}, {1, 1, 1}, Tissue::myocardium);
  EXPECT_EQ(pim_percent(m), 0.0);
  for (std::size_t x = 0; x < 10; ++x) m(x, 0, 0) = m(x, 1, 0) = Tissue::infarct;
  EXPECT_DOUBLE_EQ(pim_percent(m), 20.0);
  for (auto& t : m.values()) t = Tissue::pmo;
  EXPECT_DOUBLE_EQ(pim_percent(m), 100.0);
  ScopedWarningCapture capture;
  EXPECT_EQ(pim_percent(LabelMap({2, 2, 1}, {1, 1, 1}, Tissue::cavity)), 0.0);
  EXPECT_EQ(capture.messages().size(), 1u);
}

TEST(PmoPresence, Examples) {
  const LabelMap clean({3, 3, 5}, {1, 1, 1}, Tissue::myocardium);
  LabelMap with_pmo = clean;
  with_pmo(1, 1, 2) = Tissue::pmo;
  const std::vector<std::pair<LabelMap, LabelMap>> agree{{clean, clean}, {with_pmo, with_pmo}};
  auto acc = pmo_presence_accuracy(agree);
  EXPECT_EQ(acc.case_percent, 100.0);
  EXPECT_EQ(acc.slice_percent, 100.0);
  const std::vector<std::pair<LabelMap, LabelMap>> one_miss{{clean, clean}, {with_pmo, clean}};
  acc = pmo_presence_accuracy(one_miss);
  EXPECT_EQ(acc.case_percent, 50.0);
  EXPECT_EQ(acc.slice_percent, 90.0);
  EXPECT_THROW(pmo_presence_accuracy(std::span<const std::pair<LabelMap, LabelMap>>{}), ArgumentError);
}

TEST(Consistency, Examples) {
  LabelMap m({8, 8, 1}, {1, 1, 1}, Tissue::background);
  EXPECT_EQ(consistency_violations(m), 0u);
  for (std::size_t y = 1; y < 7; ++y)
    for (std::size_t x = 1; x < 7; ++x) m(x, y, 0) = Tissue::myocardium;
  for (std::size_t y = 2; y < 5; ++y)
    for (std::size_t x = 2; x < 5; ++x) m(x, y, 0) = Tissue::infarct;
  m(3, 3, 0) = Tissue::pmo;
  EXPECT_EQ(consistency_violations(m), 0u);
  LabelMap island({5, 5, 1}, {1, 1, 1}, Tissue::background);
  island(2, 2, 0) = Tissue::pmo;
  EXPECT_EQ(consistency_violations(island), 1u);
  LabelMap loose({5, 5, 1}, {1, 1, 1}, Tissue::background);
  loose(0, 0, 0) = Tissue::infarct;
  loose(4, 4, 0) = Tissue::infarct;
  EXPECT_EQ(consistency_violations(loose), 2u);
}

TEST(Classification, ConfusionFromLeaderboardRow) {
  const auto s = scores_from_confusion(30, 3, 16, 1);
  EXPECT_NEAR(*s.sensitivity, 90.91, 0.005);
  EXPECT_NEAR(*s.specificity, 94.12, 0.005);
  EXPECT_NEAR(*s.precision, 96.77, 0.005);
  EXPECT_NEAR(s.accuracy, 92.0, 1e-12);
}

TEST(Classification, FromLabels) {
  std::vector<bool> truth, pred;
  for (int i = 0; i < 33; ++i) {
    truth.push_back(true);
    pred.push_back(i >= 3);
  }
  for (int i = 0; i < 17; ++i) {
    truth.push_back(false);
    pred.push_back(i == 0);
  }
  const std::unique_ptr<bool[]> t(new bool[50]), p(new bool[50]);
  std::copy(truth.begin(), truth.end(), t.get());
  std::copy(pred.begin(), pred.end(), p.get());
  const auto s = classification_metrics(std::span<const bool>(t.get(), 50), std::span<const bool>(p.get(), 50));
  EXPECT_EQ(s.tp, 30u);
  EXPECT_EQ(s.fn, 3u);
  EXPECT_EQ(s.tn, 16u);
  EXPECT_EQ(s.fp, 1u);
}

TEST(Classification, AllCorrectAndDegenerate) {
  const bool truth[] = {true, false, true};
  const auto s = classification_metrics(truth, truth);
  EXPECT_EQ(*s.sensitivity, 100.0);
  EXPECT_EQ(*s.specificity, 100.0);
  EXPECT_EQ(*s.precision, 100.0);
  EXPECT_EQ(s.accuracy, 100.0);
  const bool negatives[] = {false, false};
  const auto d = classification_metrics(negatives, negatives);
  EXPECT_FALSE(d.sensitivity.has_value());
  EXPECT_FALSE(d.precision.has_value());
  EXPECT_EQ(*d.specificity, 100.0);
  EXPECT_THROW(classification_metrics(std::span<const bool>(truth, 3), std::span<const bool>(truth, 2)),
               ArgumentError);
}

TEST(EvaluateCase, PerfectPrediction) {
  gen::Rng rng(94);
  const auto m = blocky_map(rng, {10, 10, 4}, {1.5, 1.5, 8});
  const auto c = evaluate_case(m, m, "x");
  for (const VolumeOverlap* o : {static_cast<const VolumeOverlap*>(&c.myocardium),
                                 static_cast<const VolumeOverlap*>(&c.infarct),
                                 static_cast<const VolumeOverlap*>(&c.pmo)}) {
    EXPECT_EQ(o->dice, 1.0);
    EXPECT_EQ(o->vol_diff, 0.0);
  }
  EXPECT_EQ(c.myocardium.hausdorff_mm, 0.0);
  EXPECT_EQ(c.infarct.pct_diff, 0.0);
  EXPECT_EQ(c.pmo.pct_diff, 0.0);
  EXPECT_TRUE(c.pmo_presence.case_hit);
}

TEST(EvaluateCase, InfarctRelabelledNormal) {
  LabelMap truth({8, 8, 2}, {1, 1, 1}, Tissue::myocardium);
  truth(3, 3, 0) = truth(4, 3, 0) = Tissue::infarct;
  LabelMap pred = truth;
  for (auto& t : pred.values())
    if (t == Tissue::infarct) t = Tissue::myocardium;
  const auto c = evaluate_case(truth, pred);
  EXPECT_EQ(c.infarct.dice, 0.0);
  EXPECT_EQ(c.myocardium.dice, 1.0);
  EXPECT_EQ(c.myocardium.hausdorff_mm, 0.0);
  EXPECT_EQ(c.myocardium.vol_diff, 0.0);
}

TEST(EvaluateCase, FieldsMatchIndependentCalls) {
  gen::Rng rng(95);
  ScopedWarningCapture capture;
  for (int trial = 0; trial < 40; ++trial) {
    const Spacing s = gen::random_spacing(rng);
    const auto t = blocky_map(rng, {8, 8, 3}, s);
    const auto p = blocky_map(rng, {8, 8, 3}, s);
    const auto c = evaluate_case(t, p);
    const double voxel = s.x * s.y * s.z / 1000.0;
    auto check = [&](const VolumeOverlap& o, TissueSelector sel) {
      const auto mt = region_mask(t, sel), mp = region_mask(p, sel);
      EXPECT_DOUBLE_EQ(o.dice, oracle::dice(mt, mp));
      EXPECT_NEAR(o.vol_truth, static_cast<double>(count_set(mt)) * voxel, 1e-9);
      EXPECT_NEAR(o.vol_pred, static_cast<double>(count_set(mp)) * voxel, 1e-9);
      EXPECT_NEAR(o.vol_diff, std::abs(o.vol_truth - o.vol_pred), 1e-12);
    };
    check(c.myocardium, selectors::kMyocardiumTotal);
    check(c.infarct, selectors::kInfarctPlusPmo);
    check(c.pmo, selectors::kPmo);
    const double hd = oracle::hausdorff(region_mask(t, selectors::kMyocardiumTotal),
                                        region_mask(p, selectors::kMyocardiumTotal), s);
    if (hd >= 0) {
      EXPECT_NEAR(c.myocardium.hausdorff_mm, hd, 1e-9);
    }
    EXPECT_NEAR(c.infarct.pct_diff,
                std::abs(pim_oracle(t, {Tissue::infarct, Tissue::pmo}) - pim_oracle(p, {Tissue::infarct, Tissue::pmo})),
                1e-9);
    EXPECT_NEAR(c.pmo.pct_diff, std::abs(pim_oracle(t, {Tissue::pmo}) - pim_oracle(p, {Tissue::pmo})), 1e-9);
    EXPECT_EQ(c.consistency_violations, consistency_violations(p));
  }
}

TEST(EvaluateCase, VolumesInvariantUnderTranslation) {
  gen::Rng rng(96);
  const auto t = blocky_map(rng, {12, 12, 3}, {1, 1, 1});
  LabelMap shifted(t.extents(), t.spacing(), Tissue::background);
  for (std::size_t z = 0; z < 3; ++z)
    for (std::size_t y = 0; y < 12; ++y)
      for (std::size_t x = 0; x < 12; ++x) shifted((x + 5) % 12, (y + 7) % 12, z) = t(x, y, z);
  const auto a = evaluate_case(t, t), b = evaluate_case(shifted, shifted);
  EXPECT_DOUBLE_EQ(a.myocardium.vol_truth, b.myocardium.vol_truth);
  EXPECT_DOUBLE_EQ(a.infarct.vol_truth, b.infarct.vol_truth);
  EXPECT_DOUBLE_EQ(a.pmo.vol_truth, b.pmo.vol_truth);
}

TEST(EvaluateCase, GeometryMismatchAndWorstCase) {
  LabelMap truth({4, 4, 2}, {2, 2, 10}, Tissue::myocardium);
  truth(0, 0, 1) = Tissue::pmo;
  EXPECT_THROW(evaluate_case(truth, LabelMap({4, 3, 2}, {2, 2, 10})), GeometryError);
  const auto w = worst_case_metrics(truth, "c", "missing");
  EXPECT_EQ(w.myocardium.dice, 0.0);
  EXPECT_TRUE(w.myocardium.hausdorff_sentinel);
  EXPECT_DOUBLE_EQ(w.myocardium.hausdorff_mm, std::sqrt(64.0 + 64.0 + 400.0));
  EXPECT_NEAR(w.myocardium.vol_diff, 32 * 0.04, 1e-12);
  EXPECT_NEAR(w.pmo.pct_diff, 100.0 / 32.0, 1e-12);
  EXPECT_FALSE(w.pmo_presence.case_hit);
  EXPECT_EQ(w.pmo_presence.slices_correct, 0u);
  EXPECT_EQ(*w.error, "missing");
}

TEST(Submission, SingleAndDuplicatedCase) {
  gen::Rng rng(97);
  const auto t = blocky_map(rng, {8, 8, 3}, {1, 1, 1});
  const auto p = blocky_map(rng, {8, 8, 3}, {1, 1, 1});
  ScopedWarningCapture capture;
  const auto c = evaluate_case(t, p);
  const auto one = evaluate_submission(std::vector<CaseMetrics>{c});
  const auto values = ranked_values(c);
  for (std::size_t k = 0; k < kRankedMetricCount; ++k) EXPECT_EQ(one.ranked[k].mean, values[k]);
  const auto two = evaluate_submission(std::vector<CaseMetrics>{c, c});
  for (std::size_t k = 0; k < kRankedMetricCount; ++k) {
    EXPECT_DOUBLE_EQ(two.ranked[k].mean, values[k]);
    EXPECT_EQ(two.ranked[k].std, 0.0);
  }
  EXPECT_THROW(evaluate_submission(std::vector<CaseMetrics>{}), ArgumentError);
}

TEST(Submission, HandBuiltAverages) {
  CaseMetrics a, b;
  a.myocardium.dice = 0.8;
  b.myocardium.dice = 0.6;
  a.infarct.pct_diff = 4.0;
  b.infarct.pct_diff = 10.0;
  a.pmo_presence = {true, 3, 4};
  b.pmo_presence = {false, 1, 4};
  b.error = "missing";
  const auto s = evaluate_submission(std::vector<CaseMetrics>{a, b});
  EXPECT_DOUBLE_EQ(s.ranked[0].mean, 0.7);
  EXPECT_NEAR(s.ranked[0].std, 0.1, 1e-12);
  EXPECT_DOUBLE_EQ(s.ranked[5].mean, 7.0);
  EXPECT_DOUBLE_EQ(s.ranked[5].std, 3.0);
  EXPECT_EQ(s.pmo_accuracy.case_percent, 50.0);
  EXPECT_EQ(s.pmo_accuracy.slice_percent, 50.0);
  EXPECT_EQ(s.failed_cases, 1u);
  EXPECT_EQ(s.cases, 2u);
}

TEST(CrossModule, OneMinusGeneralizedDiceIsDice) {
  gen::Rng rng(98);
  for (int trial = 0; trial < 30; ++trial) {
    const auto a = gen::random_mask(rng, {6, 6, 2}, 0.4);
    const auto b = gen::random_mask(rng, {6, 6, 2}, 0.4);
    // A single foreground channel with equal (unit) weight.
    std::vector<double> va(a.values().begin(), a.values().end()), vb(b.values().begin(), b.values().end());
    const neural::ProbabilityMap pa(1, va.size(), va), pb(1, vb.size(), vb);
    ScopedWarningCapture capture;
    EXPECT_NEAR(1.0 - neural::generalized_dice_loss(pb, pa, neural::ClassWeights::uniform(1)), dice(a, b), 1e-12);
  }
}
