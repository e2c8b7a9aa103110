// Acceptance suite. Each criterion prints one PASS/FAIL line with the
// measured quantities and elapsed time; the exit status is nonzero when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "demri/augment.hpp"
#include "demri/classifiers.hpp"
#include "demri/diagnostics.hpp"
#include "demri/metrics.hpp"
#include "demri/neuralref.hpp"
#include "demri/nifti.hpp"
#include "demri/ranking.hpp"
#include "demri/scarseg.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"
#include "support/population.hpp"

using namespace demri;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome classification_table() {
  const auto s = metrics::scores_from_confusion(30, 3, 16, 1);
  const bool ok = s.sensitivity && s.specificity && s.precision &&
                  std::abs(*s.sensitivity - 90.91) <= 0.01 && std::abs(*s.specificity - 94.12) <= 0.01 &&
                  std::abs(*s.precision - 96.77) <= 0.01 && std::abs(s.accuracy - 92.0) <= 0.01;
  return {ok, ok ? fmt("sens %.2f spec %.2f prec %.2f acc %.2f", *s.sensitivity, *s.specificity, *s.precision,
                       s.accuracy)
                 : "value outside tolerance or undefined"};
}

Outcome metric_oracles() {
  gen::Rng rng(2001);
  std::uniform_real_distribution<double> density(0.05, 0.7);
  std::size_t dice_bad = 0, hd_bad = 0, sentinel = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const Spacing s = gen::random_spacing(rng);
    const auto a = gen::random_mask(rng, {8, 8, 3}, density(rng), s);
    const auto b = gen::random_mask(rng, {8, 8, 3}, density(rng), s);
    if (metrics::dice(a, b) != oracle::dice(a, b)) ++dice_bad;
    const double want = oracle::hausdorff(a, b, s);
    ScopedWarningCapture quiet;
    const auto got = metrics::hausdorff3d(a, b, s);
    if (want < 0) {
      sentinel += got.sentinel ? 1 : 0;
      if (!got.sentinel) ++hd_bad;
      continue;
    }
    worst = std::max(worst, std::abs(got.mm - want));
    if (std::abs(got.mm - want) > 1e-9) ++hd_bad;
  }
  return {dice_bad == 0 && hd_bad == 0,
          fmt("dice mismatches %zu, hausdorff mismatches %zu, max |dHD| %.3g mm", dice_bad, hd_bad, worst)};
}

Outcome ranking_order() {
  const std::vector<double> published{0.879, 0.855, 0.841, 0.836};
  const auto ranks = ranking::rank_metric(published, ranking::Direction::higher_better);
  bool ok = ranks == std::vector<int>{1, 2, 3, 4};
  // Full leaderboard with only this column varying.
  std::vector<ranking::SubmissionScores> subs;
  const char* ids[] = {"s1", "s2", "s3", "s4"};
  for (std::size_t i = 0; i < published.size(); ++i) {
    ranking::SubmissionScores s;
    s.submission_id = ids[i];
    s.values.fill(0.0);
    s.values[0] = published[i];
    subs.push_back(s);
  }
  const auto board = ranking::build_leaderboard(subs);
  for (std::size_t i = 0; i < board.entries.size(); ++i) {
    ok = ok && board.entries[i].submission_id == ids[i];
    ok = ok && board.entries[i].subranks[0] == static_cast<int>(i) + 1;
  }
  return {ok, fmt("ranks %d %d %d %d", ranks[0], ranks[1], ranks[2], ranks[3])};
}

std::vector<double> sample_mixture(gen::Rng& rng, std::size_t n, double pi, double sr, double mu, double sd) {
  std::bernoulli_distribution scar(pi);
  std::normal_distribution<double> g(mu, sd);
  std::vector<double> x(n);
  for (auto& v : x) v = scar(rng) ? std::max(0.0, g(rng)) : gen::rayleigh(rng, sr);
  return x;
}

Outcome em_recovery() {
  gen::Rng rng(2004);
  const auto x = sample_mixture(rng, 10000, 0.3, 30.0, 200.0, 20.0);
  const auto m = scarseg::fit_mixture_em(x);
  const double e_pi = std::abs(m.pi - 0.3) / 0.3, e_sr = std::abs(m.sigma_r - 30.0) / 30.0;
  const double e_mu = std::abs(m.mu_g - 200.0) / 200.0, e_sd = std::abs(m.sigma_g - 20.0) / 20.0;
  const bool mono = scarseg::log_likelihood_monotone(m);
  const bool ok = e_pi <= 0.05 && e_sr <= 0.05 && e_mu <= 0.05 && e_sd <= 0.05 && mono;
  return {ok, fmt("pi %.4f sigma_r %.3f mu %.3f sigma %.3f (max rel err %.4f), %zu iterations, monotone %s", m.pi,
                  m.sigma_r, m.mu_g, m.sigma_g, std::max({e_pi, e_sr, e_mu, e_sd}), m.iterations,
                  mono ? "yes" : "no")};
}

Outcome losses() {
  using namespace neural;
  gen::Rng rng(2005);
  std::uniform_int_distribution<std::size_t> classes(2, 5), pixels(4, 200);
  std::uniform_real_distribution<double> wu(0.1, 3.0);
  double worst_gd = 0.0, worst_ce = 0.0, worst_dice = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = classes(rng), n = pixels(rng);
    std::uniform_int_distribution<int> label(0, static_cast<int>(c) - 1);
    std::vector<int> labels(n);
    for (auto& l : labels) l = label(rng);
    const auto r = ProbabilityMap::one_hot(labels, c);
    ClassWeights w = ClassWeights::uniform(c);
    for (auto& v : w.w) v = wu(rng);
    worst_gd = std::max(worst_gd, std::abs(generalized_dice_loss(r, r, w)));
    worst_ce = std::max(worst_ce, weighted_cross_entropy(r, r, w));

    const auto a = gen::random_mask(rng, {6, 6, 2}, 0.4);
    const auto b = gen::random_mask(rng, {6, 6, 2}, 0.4);
    if (count_set(a) + count_set(b) == 0) continue;
    std::vector<int> la(a.values().begin(), a.values().end()), lb(b.values().begin(), b.values().end());
    const ClassWeights fg_only{{0.0, 1.0}, WeightMode::uniform, {}};
    ScopedWarningCapture quiet;
    const double gd = generalized_dice_loss(ProbabilityMap::one_hot(lb, 2), ProbabilityMap::one_hot(la, 2), fg_only);
    worst_dice = std::max(worst_dice, std::abs((1.0 - gd) - metrics::dice(a, b)));
  }
  const bool ok = worst_gd == 0.0 && worst_ce <= 1e-6 && worst_dice <= 1e-9;
  return {ok, fmt("max GD %.3g, max CE %.3g, max |1-GD-Dice| %.3g", worst_gd, worst_ce, worst_dice)};
}

augment::BinaryMask random_blob(gen::Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> centre(0.3 * n, 0.7 * n), radius(2.0, 0.25 * n);
  const double cx = centre(rng), cy = centre(rng), rx = radius(rng), ry = radius(rng);
  std::bernoulli_distribution noise(0.05);
  augment::BinaryMask m(n, n, std::uint8_t{0});
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double u = (static_cast<double>(x) - cx) / rx, v = (static_cast<double>(y) - cy) / ry;
      m(x, y) = (u * u + v * v <= 1.0) != noise(rng) ? 1 : 0;
    }
  return m;
}

// Centroid and mean distance to it, summed in the plainest way.
void centroid_spread(const augment::BinaryMask& m, double& cx, double& cy, double& spread) {
  double sx = 0, sy = 0, n = 0;
  for (std::size_t y = 0; y < m.ny(); ++y)
    for (std::size_t x = 0; x < m.nx(); ++x)
      if (m(x, y)) {
        sx += static_cast<double>(x);
        sy += static_cast<double>(y);
        n += 1;
      }
  cx = sx / n;
  cy = sy / n;
  double d = 0;
  for (std::size_t y = 0; y < m.ny(); ++y)
    for (std::size_t x = 0; x < m.nx(); ++x)
      if (m(x, y)) d += std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
  spread = d / n;
}

Outcome affine_identity() {
  gen::Rng rng(2006);
  double worst = 0.0, worst_self = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto mi = random_blob(rng, 48), mj = random_blob(rng, 48);
    double cix, ciy, si, cjx, cjy, sj;
    centroid_spread(mi, cix, ciy, si);
    centroid_spread(mj, cjx, cjy, sj);
    const double s = si / sj;
    const double want[3][3] = {{s, 0, cix - s * cjx}, {0, s, ciy - s * cjy}, {0, 0, 1}};
    const auto t = augment::foreground_affine(mi, mj).transform;
    const auto self = augment::foreground_affine(mi, mi).transform;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        worst = std::max(worst, std::abs(t[r][c] - want[r][c]));
        worst_self = std::max(worst_self, std::abs(self[r][c] - (r == c ? 1.0 : 0.0)));
      }
  }
  return {worst <= 1e-12 && worst_self == 0.0,
          fmt("max |T - expected| %.3g, max |T_self - I| %.3g", worst, worst_self)};
}

// Writes a value that the header validation must reject into one field.
void corrupt_field(gen::Rng& rng, std::vector<std::uint8_t>& b, std::int16_t nx) {
  using nifti::detail::store;
  std::uniform_int_distribution<int> field(0, 8);
  std::uniform_int_distribution<int> i16(-32768, 32767);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_int_distribution<int> which_dim(1, 3);
  std::uniform_real_distribution<float> negative(-1e6f, 0.0f);
  switch (field(rng)) {
    case 0: {  // sizeof_hdr
      std::int32_t v = 348;
      while (v == 348) v = static_cast<std::int32_t>(rng());
      store<std::int32_t>(b, 0, v);
      break;
    }
    case 1: {  // magic
      for (int k = 0; k < 4; ++k) b[344 + k] = static_cast<std::uint8_t>(byte(rng));
      if (b[344] == 'n' && (b[345] == '+' || b[345] == 'i') && b[346] == '1' && b[347] == 0) b[347] = 'x';
      break;
    }
    case 2: {  // dim[0]
      std::int16_t v = 3;
      while (v == 2 || v == 3) v = static_cast<std::int16_t>(i16(rng));
      store<std::int16_t>(b, 40, v);
      break;
    }
    case 3: {  // one extent: non-positive or larger than the payload
      std::uniform_int_distribution<int> bad(-32768, 0), big(nx + 1, 32767);
      const int v = std::bernoulli_distribution(0.5)(rng) ? bad(rng) : big(rng);
      store<std::int16_t>(b, 40 + 2 * which_dim(rng), static_cast<std::int16_t>(v));
      break;
    }
    case 4: {  // datatype
      std::int16_t v = 2;
      while (nifti::datatype_from_code(v)) v = static_cast<std::int16_t>(i16(rng));
      store<std::int16_t>(b, 70, v);
      break;
    }
    case 5: {  // bitpix
      const auto current = nifti::detail::load<std::int16_t>(b, 72, false);
      std::int16_t v = current;
      while (v == current) v = static_cast<std::int16_t>(i16(rng));
      store<std::int16_t>(b, 72, v);
      break;
    }
    case 6: {  // vox_offset below the header, beyond the file, or not finite
      const float choices[] = {negative(rng), 0.0f, 347.0f, static_cast<float>(b.size() + 1 + byte(rng)),
                               std::numeric_limits<float>::quiet_NaN(), std::numeric_limits<float>::infinity()};
      store<float>(b, 108, choices[std::uniform_int_distribution<int>(0, 5)(rng)]);
      break;
    }
    default: {  // pixdim[1..3]
      const float choices[] = {negative(rng), 0.0f, std::numeric_limits<float>::quiet_NaN(),
                               -std::numeric_limits<float>::infinity()};
      store<float>(b, 76 + 4 * which_dim(rng), choices[std::uniform_int_distribution<int>(0, 3)(rng)]);
      break;
    }
  }
}

Outcome nifti_round_trip() {
  gen::Rng rng(2007);
  std::size_t mismatched = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<std::size_t> ext(1, 12);
    const auto m = gen::random_labelmap(rng, {ext(rng), ext(rng), ext(rng)}, gen::random_spacing(rng));
    const auto plain = nifti::encode_labelmap(m);
    for (const auto& bytes : {plain, nifti::detail::gzip(plain)}) {
      const auto back = nifti::decode_labelmap(bytes);
      if (back.extents() != m.extents() || !std::equal(m.values().begin(), m.values().end(), back.values().begin()))
        ++mismatched;
    }
  }
  const auto base = nifti::encode_labelmap(gen::random_labelmap(rng, {6, 6, 2}));
  std::size_t accepted = 0, other = 0;
  std::bernoulli_distribution gz(0.5);
  std::uniform_int_distribution<int> fields(1, 3);
  for (int trial = 0; trial < 1000; ++trial) {
    auto bytes = base;
    const int k = fields(rng);
    for (int f = 0; f < k; ++f) corrupt_field(rng, bytes, 6);
    if (gz(rng)) bytes = nifti::detail::gzip(bytes);
    try {
      nifti::decode_labelmap(bytes);
      ++accepted;
    } catch (const Error&) {
    } catch (...) {
      ++other;
    }
  }
  return {mismatched == 0 && accepted == 0 && other == 0,
          fmt("round-trip mismatches %zu/200, corrupted headers accepted %zu/1000, foreign exceptions %zu", mismatched,
              accepted, other)};
}

double pim(const LabelMap& m) {
  return 100.0 * static_cast<double>(count_voxels(m, selectors::kInfarctPlusPmo)) /
         static_cast<double>(count_voxels(m, selectors::kMyocardiumTotal));
}

Outcome classical_phantoms() {
  gen::Rng rng(2008);
  double dice_sum = 0.0, pim_err_sum = 0.0;
  const int n = 20;
  for (int trial = 0; trial < n; ++trial) {
    const auto ph = gen::ring_phantom(rng);
    const auto r = scarseg::segment_classical(ph.image, ph.truth);
    dice_sum += metrics::dice(region_mask(ph.truth, selectors::kInfarctPlusPmo),
                              region_mask(r.labels, selectors::kInfarctPlusPmo));
    pim_err_sum += std::abs(pim(r.labels) - pim(ph.truth));
  }
  const double d = dice_sum / n, e = pim_err_sum / n;
  return {d >= 0.7 && e <= 5.0, fmt("mean scar Dice %.3f, mean |PIM error| %.2f points", d, e)};
}

Outcome fusion_benefit() {
  using namespace clinical;
  double gap_sum = 0.0, clin_sum = 0.0, fused_sum = 0.0;
  const int seeds = 20;
  for (int seed = 1; seed <= seeds; ++seed) {
    gen::Rng rng(static_cast<std::uint64_t>(seed));
    const auto pop = gen::synthetic_population(rng, 1000);
    std::vector<ClinicalRecord> train, test;
    std::vector<double> vtrain, vtest;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      (i < 700 ? train : test).push_back(pop[i].record);
      (i < 700 ? vtrain : vtest).push_back(pop[i].scar_volume_cm3);
    }
    const auto plain = train_classifier(train);
    const auto fused = train_classifier(train, {}, std::span<const double>(vtrain));
    std::size_t ok_plain = 0, ok_fused = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const int truth = *test[i].pathological ? 1 : 0;
      ok_plain += classify(test[i], plain).label == truth;
      ok_fused += fused_classify(test[i], vtest[i], fused).label == truth;
    }
    const double a = 100.0 * static_cast<double>(ok_plain) / static_cast<double>(test.size());
    const double b = 100.0 * static_cast<double>(ok_fused) / static_cast<double>(test.size());
    clin_sum += a;
    fused_sum += b;
    gap_sum += b - a;
  }
  const double gap = gap_sum / seeds;
  return {gap >= 5.0, fmt("clinical-only %.2f%%, fused %.2f%%, mean gap %.2f points over %d seeds",
                          clin_sum / seeds, fused_sum / seeds, gap, seeds)};
}

struct Criterion {
  const char* name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {"AC1 classification metrics from confusion counts", 1.0, classification_table},
      {"AC2 Dice and Hausdorff against brute-force oracles", 10.0, metric_oracles},
      {"AC3 ranking follows published myocardium Dice order", 1.0, ranking_order},
      {"AC4 Rayleigh-Gaussian EM recovery", 5.0, em_recovery},
      {"AC5 loss identities", 0.0, losses},
      {"AC6 foreground affine transform", 0.0, affine_identity},
      {"AC7 NIfTI round trip and corrupted headers", 0.0, nifti_round_trip},
      {"AC8 classical segmentation on ring phantoms", 60.0, classical_phantoms},
      {"AC9 scar volume improves classification", 30.0, fusion_benefit},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_s == 0.0 || secs < c.budget_s;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("%s %s: %s; %.3f s%s\n", pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), secs,
                in_time ? "" : " (over time budget)");
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
