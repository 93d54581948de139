#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hiertail/hierarchy.hpp"
#include "hiertail/ingest.hpp"
#include "hiertail/rng.hpp"

namespace hiertail {

struct SynthConfig {
  std::size_t n_users = 500;
  std::size_t n_locations = 2000;
  std::size_t n_categories = 200;
  std::size_t n_activities = 10;
  std::size_t n_needs = 3;
  double zipf_exponent = 1.1;
  std::size_t checkins_min = 120;
  std::size_t checkins_max = 200;
  std::size_t days = 60;
  /// Probability that a check-in is drawn from the user's preferred need class.
  double need_bias = 0.7;
  std::int64_t start_timestamp = 1'600'000'000;
  std::uint64_t seed = 42;
};

/// Throws InfeasibleConfig when the level sizes are not non-decreasing from
/// need to location or a numeric field is out of range.
void validate(const SynthConfig& config);

struct SynthHierarchy {
  LabelHierarchy hierarchy;
  /// act2need, cat2act, loc2cat, in that order.
  std::vector<ParentMap> maps;
  /// popularity_rank[leaf] = 0-based Zipf rank of the location.
  std::vector<std::size_t> popularity_rank;
};

/// Random tree where every parent receives at least one child. Node names
/// are zero-padded so lexicographic order equals numeric order.
SynthHierarchy generate_hierarchy(const SynthConfig& config, Rng& rng);

/// Inverse-CDF sampler over ranks 0..n-1 with P(r) proportional to (r+1)^-s.
class ZipfTable {
 public:
  ZipfTable(std::size_t n, double exponent);
  std::size_t sample(Rng& rng) const;
  double probability(std::size_t rank) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

std::vector<CheckinRecord> generate_checkins(const SynthConfig& config,
                                             const SynthHierarchy& hierarchy, Rng& rng);

struct SynthCorpus {
  SynthHierarchy hierarchy;
  std::vector<CheckinRecord> records;
};

/// generate_hierarchy then generate_checkins from one generator seeded with
/// config.seed.
SynthCorpus generate_corpus(const SynthConfig& config);

/// Writes checkins.csv, loc2cat.tsv, cat2act.tsv, act2need.tsv into `dir`.
void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus);

/// Gini coefficient of a list of non-negative counts.
double gini(std::vector<std::size_t> counts);

}  // namespace hiertail
