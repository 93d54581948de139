#include "hiertail/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "hiertail/error.hpp"

namespace hiertail {

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InfeasibleConfig, msg); };
  if (c.n_needs == 0) fail("n_needs must be >= 1");
  if (c.n_needs > c.n_activities) fail("more needs than activities");
  if (c.n_activities > c.n_categories) fail("more activities than categories");
  if (c.n_categories > c.n_locations) fail("more categories than locations");
  if (c.n_users == 0) fail("n_users must be >= 1");
  if (!(c.zipf_exponent > 0.0)) fail("zipf exponent must be positive");
  if (c.checkins_min == 0 || c.checkins_min > c.checkins_max) {
    fail("check-in range must satisfy 1 <= min <= max");
  }
  if (c.days == 0) fail("days must be >= 1");
  if (!(c.need_bias >= 0.0 && c.need_bias <= 1.0)) fail("need_bias must lie in [0, 1]");
  if (c.start_timestamp < 0) fail("start timestamp must be non-negative");
}

namespace {

std::string padded(char prefix, std::size_t i, std::size_t n) {
  const int width = static_cast<int>(std::to_string(n > 0 ? n - 1 : 0).size());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*zu", prefix, width, i);
  return buf;
}

// Each parent gets one child from a shuffled order, the rest are uniform.
std::vector<std::size_t> assign_parents(std::size_t children, std::size_t parents, Rng& rng) {
  std::vector<std::size_t> order(children);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> parent(children);
  for (std::size_t i = 0; i < children; ++i) {
    parent[order[i]] = i < parents ? i : rng.below(parents);
  }
  return parent;
}

}  // namespace

SynthHierarchy generate_hierarchy(const SynthConfig& config, Rng& rng) {
  validate(config);
  const std::size_t sizes[4] = {config.n_needs, config.n_activities, config.n_categories,
                                config.n_locations};
  const char prefixes[4] = {'N', 'A', 'C', 'L'};
  std::vector<std::vector<std::string>> names(4);
  for (int level = 0; level < 4; ++level) {
    for (std::size_t i = 0; i < sizes[level]; ++i) {
      names[level].push_back(padded(prefixes[level], i, sizes[level]));
    }
  }
  SynthHierarchy out;
  for (int level = 1; level < 4; ++level) {
    const auto parent = assign_parents(sizes[level], sizes[level - 1], rng);
    ParentMap map;
    for (std::size_t i = 0; i < sizes[level]; ++i) {
      map.add(names[level][i], names[level - 1][parent[i]]);
    }
    out.maps.push_back(std::move(map));
  }
  out.hierarchy = LabelHierarchy::from_maps(out.maps);
  out.popularity_rank.resize(config.n_locations);
  std::iota(out.popularity_rank.begin(), out.popularity_rank.end(), 0);
  rng.shuffle(std::span<std::size_t>(out.popularity_rank));
  return out;
}

ZipfTable::ZipfTable(std::size_t n, double exponent) : cdf_(n) {
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    total += std::pow(static_cast<double>(r + 1), -exponent);
    cdf_[r] = total;
  }
  for (auto& c : cdf_) c /= total;
  if (!cdf_.empty()) cdf_.back() = 1.0;
}

std::size_t ZipfTable::sample(Rng& rng) const {
  const double u = rng.uniform_open();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
}

double ZipfTable::probability(std::size_t rank) const {
  return rank == 0 ? cdf_[0] : cdf_[rank] - cdf_[rank - 1];
}

std::vector<CheckinRecord> generate_checkins(const SynthConfig& config,
                                             const SynthHierarchy& synth, Rng& rng) {
  validate(config);
  const auto& h = synth.hierarchy;
  const std::size_t n_loc = h.leaf_count();
  if (n_loc != config.n_locations || synth.popularity_rank.size() != n_loc) {
    throw Error(ErrorCode::InfeasibleConfig, "hierarchy does not match the synth config");
  }

  // Locations by popularity, globally and within each need class.
  std::vector<int> by_rank(n_loc);
  for (std::size_t leaf = 0; leaf < n_loc; ++leaf) {
    by_rank[synth.popularity_rank[leaf]] = static_cast<int>(leaf);
  }
  const std::size_t n_needs = h.class_count(1);
  std::vector<std::vector<int>> need_by_rank(n_needs);
  for (int leaf : by_rank) need_by_rank[h.ancestor(leaf, 1)].push_back(leaf);
  const ZipfTable global(n_loc, config.zipf_exponent);
  std::vector<ZipfTable> per_need;
  for (const auto& locs : need_by_rank) per_need.emplace_back(locs.size(), config.zipf_exponent);

  std::vector<std::pair<double, double>> coords(n_loc);
  for (auto& [lat, lon] : coords) {
    lat = rng.uniform_open();
    lon = rng.uniform_open();
  }

  const int H = h.depth();
  const std::int64_t span = static_cast<std::int64_t>(config.days) * kDaySeconds;
  std::vector<CheckinRecord> records;
  std::vector<std::pair<std::int64_t, int>> visits;
  for (std::size_t u = 0; u < config.n_users; ++u) {
    const std::string user = padded('U', u, config.n_users);
    const std::size_t count =
        config.checkins_min + rng.below(config.checkins_max - config.checkins_min + 1);
    const std::size_t need = rng.below(n_needs);
    visits.clear();
    for (std::size_t i = 0; i < count; ++i) {
      int leaf;
      if (rng.uniform_open() < config.need_bias) {
        leaf = need_by_rank[need][per_need[need].sample(rng)];
      } else {
        leaf = by_rank[global.sample(rng)];
      }
      const auto offset = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span)));
      visits.emplace_back(config.start_timestamp + offset, leaf);
    }
    std::sort(visits.begin(), visits.end());
    for (const auto& [ts, leaf] : visits) {
      CheckinRecord r;
      r.user_id = user;
      r.loc_id = h.class_names(H)[leaf];
      r.lat = coords[leaf].first;
      r.lon = coords[leaf].second;
      r.category = h.class_names(H - 1)[h.ancestor(leaf, H - 1)];
      r.timestamp = ts;
      records.push_back(std::move(r));
    }
  }
  return records;
}

SynthCorpus generate_corpus(const SynthConfig& config) {
  Rng rng(config.seed);
  SynthCorpus corpus;
  corpus.hierarchy = generate_hierarchy(config, rng);
  corpus.records = generate_checkins(config, corpus.hierarchy, rng);
  return corpus;
}

void write_corpus(const std::filesystem::path& dir, const SynthCorpus& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_checkins_csv(dir / "checkins.csv", corpus.records);
  const auto& maps = corpus.hierarchy.maps;
  write_mapping_file(dir / "act2need.tsv", maps.at(0), "activity\tneed");
  write_mapping_file(dir / "cat2act.tsv", maps.at(1), "category\tactivity");
  write_mapping_file(dir / "loc2cat.tsv", maps.at(2), "location\tcategory");
}

double gini(std::vector<std::size_t> counts) {
  if (counts.empty()) return 0.0;
  std::sort(counts.begin(), counts.end());
  double weighted = 0.0;
  double total = 0.0;
  const double n = static_cast<double>(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    weighted += static_cast<double>(i + 1) * static_cast<double>(counts[i]);
    total += static_cast<double>(counts[i]);
  }
  if (total == 0.0) return 0.0;
  return (2.0 * weighted) / (n * total) - (n + 1.0) / n;
}

}  // namespace hiertail
