#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hiertail/hierarchy.hpp"
#include "hiertail/ingest.hpp"

namespace hiertail {

/// 1-based rank of the true leaf under a stable descending sort of `scores`
/// (equal scores keep ascending index order).
int rank_of_true(std::span<const double> scores, int true_leaf);

/// The k best leaves in rank order, same tie rule as rank_of_true.
std::vector<int> top_k_leaves(std::span<const double> scores, std::size_t k);

double mrr_at_k(int rank, int k);
double ndcg_at_k(int rank, int k);

enum class Group : int { Total = 0, Head = 1, Tail = 2 };
inline constexpr std::array<Group, 3> kGroups = {Group::Total, Group::Head, Group::Tail};
const char* to_string(Group g);

struct RankedPrediction {
  int true_leaf = 0;
  int rank = 0;
  std::vector<int> top_k_leaves;
};

struct EvalReport {
  std::vector<int> ks;
  /// mrr[i][group] is MRR@ks[i] averaged over the group's predictions.
  std::vector<std::array<double, 3>> mrr;
  std::vector<std::array<double, 3>> ndcg;
  std::array<std::size_t, 3> counts{};

  int depth = 0;
  /// Mean hierarchical distance between truth and top-1 prediction.
  std::array<double, 3> mean_distance{};
  /// distance_histogram[d] counts predictions at distance d (0..H), all groups.
  std::vector<std::size_t> distance_histogram;
  /// level_match_rate[h] = fraction of predictions whose LCA depth is >= h.
  std::vector<double> level_match_rate;

  double mrr_at(int k, Group g) const;
  double ndcg_at(int k, Group g) const;

  std::string to_json() const;
  std::string to_tsv() const;
  /// Text table with one row per (group, k).
  std::string to_table() const;
  static EvalReport from_json(const std::string& text);
};

/// Fills `scores` (sized to the leaf count) for one sample. Called
/// concurrently when threads > 1, so it must not mutate shared state.
using Scorer = std::function<void(const PredictionSample&, std::vector<double>& scores)>;

inline const std::vector<int> kDefaultKs = {1, 5, 10, 20};

/// Scores every sample, ranks its true next location, and averages the
/// metrics within total/head/tail groups (group of the true location).
EvalReport evaluate(std::span<const PredictionSample> samples, const Scorer& scorer,
                    const std::vector<char>& is_head, const LabelHierarchy& h,
                    const std::vector<int>& ks = kDefaultKs, unsigned threads = 1);

/// Aggregation step of evaluate(), exposed for callers that rank themselves.
EvalReport summarize(std::span<const RankedPrediction> predictions,
                     const std::vector<char>& is_head, const LabelHierarchy& h,
                     const std::vector<int>& ks);

}  // namespace hiertail
