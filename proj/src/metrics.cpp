#include "hiertail/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

#include "hiertail/error.hpp"
#include "json.hpp"

namespace hiertail {

using json = nlohmann::json;

int rank_of_true(std::span<const double> scores, int true_leaf) {
  if (true_leaf < 0 || static_cast<std::size_t>(true_leaf) >= scores.size()) {
    throw Error(ErrorCode::InvalidLeaf, "true leaf " + std::to_string(true_leaf) +
                                            " outside score vector of size " +
                                            std::to_string(scores.size()));
  }
  const double target = scores[true_leaf];
  int rank = 1;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > target || (scores[j] == target && static_cast<int>(j) < true_leaf)) {
      ++rank;
    }
  }
  return rank;
}

std::vector<int> top_k_leaves(std::span<const double> scores, std::size_t k) {
  k = std::min(k, scores.size());
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto better = [&](int a, int b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    better);
  idx.resize(k);
  return idx;
}

double mrr_at_k(int rank, int k) { return rank <= k ? 1.0 / rank : 0.0; }

double ndcg_at_k(int rank, int k) {
  return rank <= k ? 1.0 / std::log2(1.0 + static_cast<double>(rank)) : 0.0;
}

const char* to_string(Group g) {
  switch (g) {
    case Group::Total: return "total";
    case Group::Head: return "head";
    case Group::Tail: return "tail";
  }
  return "?";
}

namespace {

std::size_t k_slot(const std::vector<int>& ks, int k) {
  auto it = std::find(ks.begin(), ks.end(), k);
  if (it == ks.end()) {
    throw Error(ErrorCode::ConfigError, "k=" + std::to_string(k) + " was not evaluated");
  }
  return static_cast<std::size_t>(it - ks.begin());
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double EvalReport::mrr_at(int k, Group g) const {
  return mrr[k_slot(ks, k)][static_cast<int>(g)];
}

double EvalReport::ndcg_at(int k, Group g) const {
  return ndcg[k_slot(ks, k)][static_cast<int>(g)];
}

EvalReport summarize(std::span<const RankedPrediction> predictions,
                     const std::vector<char>& is_head, const LabelHierarchy& h,
                     const std::vector<int>& ks) {
  if (predictions.empty()) throw Error(ErrorCode::EmptySplit, "no predictions to evaluate");
  const int H = h.depth();
  EvalReport r;
  r.ks = ks;
  r.depth = H;
  r.mrr.assign(ks.size(), {0.0, 0.0, 0.0});
  r.ndcg.assign(ks.size(), {0.0, 0.0, 0.0});
  r.distance_histogram.assign(H + 1, 0);
  r.level_match_rate.assign(H + 1, 0.0);
  std::array<double, 3> distance_sum{};

  for (const auto& p : predictions) {
    if (static_cast<std::size_t>(p.true_leaf) >= is_head.size()) {
      throw Error(ErrorCode::InvalidLeaf, "true leaf outside head/tail table");
    }
    const int group = is_head[p.true_leaf] ? 1 : 2;
    ++r.counts[0];
    ++r.counts[group];
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const double m = mrr_at_k(p.rank, ks[i]);
      const double n = ndcg_at_k(p.rank, ks[i]);
      r.mrr[i][0] += m;
      r.mrr[i][group] += m;
      r.ndcg[i][0] += n;
      r.ndcg[i][group] += n;
    }
    const int top1 = p.top_k_leaves.empty() ? p.true_leaf : p.top_k_leaves.front();
    const int lca_depth = lowest_common_ancestor(h, p.true_leaf, top1).depth;
    const int distance = H - lca_depth;
    ++r.distance_histogram[distance];
    distance_sum[0] += distance;
    distance_sum[group] += distance;
    for (int level = 0; level <= lca_depth; ++level) r.level_match_rate[level] += 1.0;
  }
  for (int g = 0; g < 3; ++g) {
    if (r.counts[g] == 0) continue;
    const double n = static_cast<double>(r.counts[g]);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      r.mrr[i][g] /= n;
      r.ndcg[i][g] /= n;
    }
    r.mean_distance[g] = distance_sum[g] / n;
  }
  for (auto& rate : r.level_match_rate) rate /= static_cast<double>(r.counts[0]);
  return r;
}

EvalReport evaluate(std::span<const PredictionSample> samples, const Scorer& scorer,
                    const std::vector<char>& is_head, const LabelHierarchy& h,
                    const std::vector<int>& ks, unsigned threads) {
  if (samples.empty()) throw Error(ErrorCode::EmptySplit, "split has no prediction samples");
  if (ks.empty()) throw Error(ErrorCode::ConfigError, "no cutoffs requested");
  const std::size_t top_k = 1;
  std::vector<RankedPrediction> ranked(samples.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(h.leaf_count());
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(scores.begin(), scores.end(), 0.0);
      scorer(samples[i], scores);
      ranked[i].true_leaf = samples[i].target;
      ranked[i].rank = rank_of_true(scores, samples[i].target);
      ranked[i].top_k_leaves = top_k_leaves(scores, top_k);
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(samples.size())));
  if (threads == 1) {
    work(0, samples.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (samples.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(samples.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(work, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return summarize(ranked, is_head, h, ks);
}

std::string EvalReport::to_json() const {
  json j;
  j["metadata"] = {{"averaging", "per_prediction"},
                   {"grouping", "true_label"},
                   {"tie_break", "ascending_index"},
                   {"hier_distance", "H - depth(LCA(truth, top1))"}};
  j["ks"] = ks;
  j["depth"] = depth;
  j["counts"] = {{"total", counts[0]}, {"head", counts[1]}, {"tail", counts[2]}};
  for (const char* metric : {"mrr", "ndcg"}) {
    const auto& table = std::string(metric) == "mrr" ? mrr : ndcg;
    json m = json::object();
    for (std::size_t i = 0; i < ks.size(); ++i) {
      json row = json::object();
      for (Group g : kGroups) row[to_string(g)] = table[i][static_cast<int>(g)];
      m[std::to_string(ks[i])] = row;
    }
    j[metric] = m;
  }
  json mean = json::object();
  for (Group g : kGroups) mean[to_string(g)] = mean_distance[static_cast<int>(g)];
  json rates = json::object();
  for (std::size_t level = 1; level < level_match_rate.size(); ++level) {
    rates[std::to_string(level)] = level_match_rate[level];
  }
  j["hier_distance"] = {{"mean", mean},
                        {"histogram", distance_histogram},
                        {"level_match_rate", rates}};
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::SchemaError, "report is not valid JSON");
  try {
    EvalReport r;
    r.ks = j.at("ks").get<std::vector<int>>();
    r.depth = j.at("depth").get<int>();
    const auto& c = j.at("counts");
    r.counts = {c.at("total").get<std::size_t>(), c.at("head").get<std::size_t>(),
                c.at("tail").get<std::size_t>()};
    for (const char* metric : {"mrr", "ndcg"}) {
      auto& table = std::string(metric) == "mrr" ? r.mrr : r.ndcg;
      for (int k : r.ks) {
        const auto& row = j.at(metric).at(std::to_string(k));
        table.push_back({row.at("total").get<double>(), row.at("head").get<double>(),
                         row.at("tail").get<double>()});
      }
    }
    const auto& hd = j.at("hier_distance");
    for (Group g : kGroups) {
      r.mean_distance[static_cast<int>(g)] = hd.at("mean").at(to_string(g)).get<double>();
    }
    r.distance_histogram = hd.at("histogram").get<std::vector<std::size_t>>();
    r.level_match_rate.assign(r.depth + 1, 1.0);
    for (int level = 1; level <= r.depth; ++level) {
      r.level_match_rate[level] =
          hd.at("level_match_rate").at(std::to_string(level)).get<double>();
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed report: ") + e.what());
  }
}

std::string EvalReport::to_tsv() const {
  std::ostringstream out;
  out << "metric\tk\tgroup\tvalue\tcount\n";
  for (const char* metric : {"mrr", "ndcg"}) {
    const auto& table = std::string(metric) == "mrr" ? mrr : ndcg;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      for (Group g : kGroups) {
        out << metric << '\t' << ks[i] << '\t' << to_string(g) << '\t'
            << fmt(table[i][static_cast<int>(g)]) << '\t' << counts[static_cast<int>(g)]
            << '\n';
      }
    }
  }
  for (Group g : kGroups) {
    out << "hier_distance\t-\t" << to_string(g) << '\t'
        << fmt(mean_distance[static_cast<int>(g)]) << '\t' << counts[static_cast<int>(g)]
        << '\n';
  }
  return out.str();
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-6s %-9s", "group", "count");
  out << line;
  for (int k : ks) {
    std::snprintf(line, sizeof(line), " %9s %9s", ("MRR@" + std::to_string(k)).c_str(),
                  ("NDCG@" + std::to_string(k)).c_str());
    out << line;
  }
  out << '\n';
  for (Group g : kGroups) {
    const int gi = static_cast<int>(g);
    std::snprintf(line, sizeof(line), "%-6s %-9zu", to_string(g), counts[gi]);
    out << line;
    for (std::size_t i = 0; i < ks.size(); ++i) {
      std::snprintf(line, sizeof(line), " %9.4f %9.4f", mrr[i][gi], ndcg[i][gi]);
      out << line;
    }
    out << '\n';
  }
  out << "mean hierarchical distance (total/head/tail): " << fmt(mean_distance[0]) << " / "
      << fmt(mean_distance[1]) << " / " << fmt(mean_distance[2]) << '\n';
  out << "level match rate:";
  for (std::size_t level = 1; level < level_match_rate.size(); ++level) {
    out << "  L" << level << "=" << fmt(level_match_rate[level]);
  }
  out << '\n';
  return out.str();
}

}  // namespace hiertail
