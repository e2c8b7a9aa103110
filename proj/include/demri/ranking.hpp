#pragma once

// Leaderboard construction: competition ranking per metric, sum of the nine
// subranks, ascending order of the sum.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "demri/errors.hpp"
#include "demri/format.hpp"
#include "demri/metrics.hpp"

namespace demri::ranking {

using metrics::Direction;
using metrics::kRankedMetricCount;
using metrics::kRankedMetrics;

// Competition ranking: the best value gets 1 and ties share the lowest rank
// (1, 1, 3). NaN ranks last.
inline std::vector<int> rank_metric(std::span<const double> values, Direction direction) {
  if (values.empty()) throw ArgumentError("rank_metric: no values");
  auto better = [direction](double a, double b) {
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return direction == Direction::higher_better ? a > b : a < b;
  };
  std::vector<int> ranks(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    int strictly_better = 0;
    for (std::size_t j = 0; j < values.size(); ++j) strictly_better += better(values[j], values[i]);
    ranks[i] = strictly_better + 1;
  }
  return ranks;
}

struct SubmissionScores {
  std::string submission_id;
  std::array<double, kRankedMetricCount> values{};  // kRankedMetrics order
};

struct LeaderboardEntry {
  std::string submission_id;
  std::array<double, kRankedMetricCount> values{};
  std::array<int, kRankedMetricCount> subranks{};
  int rank_sum = 0;
  int position = 0;
};

struct Leaderboard {
  std::vector<LeaderboardEntry> entries;  // sorted by position
};

namespace detail {

// Indices of the three Dice columns used as tie-breakers, in priority order.
inline constexpr std::array<std::size_t, 3> kDiceColumns = {0, 3, 6};

inline bool same_standing(const LeaderboardEntry& a, const LeaderboardEntry& b) {
  if (a.rank_sum != b.rank_sum) return false;
  for (std::size_t k : kDiceColumns)
    if (a.values[k] != b.values[k]) return false;
  return true;
}

}  // namespace detail

// Orders by rank sum, then myocardium, infarct and PMO Dice (higher first).
// Entries equal on all four keys share a position; listing order among them
// follows the submission id.
inline Leaderboard build_leaderboard(std::span<const SubmissionScores> submissions) {
  if (submissions.empty()) throw ArgumentError("build_leaderboard: no submissions");
  Leaderboard board;
  board.entries.resize(submissions.size());
  for (std::size_t i = 0; i < submissions.size(); ++i) {
    board.entries[i].submission_id = submissions[i].submission_id;
    board.entries[i].values = submissions[i].values;
  }
  for (std::size_t k = 0; k < kRankedMetricCount; ++k) {
    std::vector<double> column(submissions.size());
    for (std::size_t i = 0; i < submissions.size(); ++i) column[i] = submissions[i].values[k];
    const auto ranks = rank_metric(column, kRankedMetrics[k].direction);
    for (std::size_t i = 0; i < submissions.size(); ++i) board.entries[i].subranks[k] = ranks[i];
  }
  for (auto& e : board.entries) e.rank_sum = std::accumulate(e.subranks.begin(), e.subranks.end(), 0);

  std::stable_sort(board.entries.begin(), board.entries.end(), [](const auto& a, const auto& b) {
    if (a.rank_sum != b.rank_sum) return a.rank_sum < b.rank_sum;
    for (std::size_t k : detail::kDiceColumns)
      if (a.values[k] != b.values[k]) return a.values[k] > b.values[k];
    return a.submission_id < b.submission_id;
  });
  for (std::size_t i = 0; i < board.entries.size(); ++i) {
    auto& e = board.entries[i];
    e.position = (i > 0 && detail::same_standing(board.entries[i - 1], e)) ? board.entries[i - 1].position
                                                                           : static_cast<int>(i + 1);
  }
  return board;
}

inline void write_csv(std::ostream& out, const Leaderboard& board) {
  out << "position,submission";
  for (const auto& m : kRankedMetrics) out << ',' << m.key;
  for (const auto& m : kRankedMetrics) out << ",rank_" << m.key;
  out << ",rank_sum\n";
  for (const auto& e : board.entries) {
    out << e.position << ',' << e.submission_id;
    for (double v : e.values) out << ',' << format6(v);
    for (int r : e.subranks) out << ',' << r;
    out << ',' << e.rank_sum << '\n';
  }
}

inline nlohmann::ordered_json to_json(const Leaderboard& board) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& e : board.entries) {
    nlohmann::ordered_json row;
    row["position"] = e.position;
    row["submission"] = e.submission_id;
    nlohmann::ordered_json values, ranks;
    for (std::size_t k = 0; k < kRankedMetricCount; ++k) {
      values[kRankedMetrics[k].key] = round6(e.values[k]);
      ranks[kRankedMetrics[k].key] = e.subranks[k];
    }
    row["metrics"] = std::move(values);
    row["subranks"] = std::move(ranks);
    row["rank_sum"] = e.rank_sum;
    rows.push_back(std::move(row));
  }
  return {{"schema", "demri-leaderboard/1"}, {"entries", std::move(rows)}};
}

}  // namespace demri::ranking
