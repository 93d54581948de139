#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hiertail {

struct CheckinRecord {
  std::string user_id;
  std::string loc_id;
  double lat = 0.0;
  double lon = 0.0;
  std::string category;
  std::int64_t timestamp = 0;  // UTC seconds

  friend bool operator==(const CheckinRecord&, const CheckinRecord&) = default;
};

enum class InputFormat { Csv, Jsonl };

InputFormat parse_input_format(std::string_view name);

struct ParseOptions {
  /// Throw on the first malformed row. When false, malformed rows are
  /// skipped and listed in ParseResult::malformed.
  bool strict = true;
};

struct ParseIssue {
  std::size_t line = 0;
  std::string message;
};

struct ParseResult {
  std::vector<CheckinRecord> records;
  std::vector<ParseIssue> malformed;
};

/// CSV header: user_id,loc_id,lat,lon,category,timestamp_utc (any column
/// order). JSONL: one object per line with the same keys.
ParseResult parse_checkins(const std::filesystem::path& path, InputFormat format,
                           ParseOptions options = {});
ParseResult parse_checkins_text(std::string_view text, InputFormat format,
                                ParseOptions options = {});

void write_checkins_csv(const std::filesystem::path& path,
                        std::span<const CheckinRecord> records);

struct FilterConfig {
  std::size_t min_location_visits = 15;
  std::size_t min_user_checkins = 100;

  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

enum class Split : std::uint8_t { Train, Val, Test };

std::string_view to_string(Split split);

/// Check-in with dense indices into the dataset tables.
struct Checkin {
  int user = 0;
  int location = 0;
  int category = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const Checkin&, const Checkin&) = default;
};

struct TrajectoryPoint {
  int location = 0;
  int category = 0;
  std::int64_t timestamp = 0;

  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct Trajectory {
  int user = 0;
  std::vector<TrajectoryPoint> points;
  Split split = Split::Train;

  std::int64_t start() const { return points.front().timestamp; }
  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

struct LocationInfo {
  std::string id;
  double lat = 0.0;
  double lon = 0.0;
  int category = 0;  // most frequent category among its check-ins

  friend bool operator==(const LocationInfo&, const LocationInfo&) = default;
};

struct CheckinDataset {
  std::vector<std::string> users;        // sorted ids
  std::vector<LocationInfo> locations;   // sorted by id
  std::vector<std::string> categories;   // sorted names
  /// Filtered check-ins ordered by (user, timestamp, location, category).
  std::vector<Checkin> checkins;
  /// Visits per location over the whole filtered dataset.
  std::vector<std::size_t> visit_counts;

  std::vector<Trajectory> trajectories;
  std::size_t dropped_unseen = 0;

  std::vector<int> head_set;
  std::vector<int> tail_set;
  std::vector<char> is_head;  // per location

  FilterConfig filter;
  std::size_t filter_rounds = 0;

  std::size_t trajectory_count(Split split) const;
  std::vector<std::string> location_ids() const;

  friend bool operator==(const CheckinDataset&, const CheckinDataset&) = default;
};

/// Drops locations below the visit threshold and users below the check-in
/// threshold, alternately, until neither rule removes anything. Indices are
/// then assigned by lexicographic id.
CheckinDataset filter_and_index(std::span<const CheckinRecord> records,
                                FilterConfig config = {});

inline constexpr std::int64_t kDaySeconds = 86400;

/// A user's trajectory window opens at its first check-in; a check-in at
/// least `window_seconds` later opens the next window. Windows with fewer
/// than two check-ins are discarded.
CheckinDataset segment_trajectories(CheckinDataset dataset,
                                    std::int64_t window_seconds = kDaySeconds);

/// Per-user chronological split: floor(train*n) trajectories to train,
/// floor(val*n) to val, the rest to test. Val/test trajectories touching a
/// user or location never seen in train are then removed.
CheckinDataset chronological_split(CheckinDataset dataset, SplitRatios ratios = {});

/// Head = the first ceil(fraction*|P|) locations by (visit count desc, index asc).
CheckinDataset partition_head_tail(CheckinDataset dataset, double head_fraction = 0.2);

struct PipelineConfig {
  FilterConfig filter;
  std::int64_t window_seconds = kDaySeconds;
  SplitRatios ratios;
  double head_fraction = 0.2;
};

/// filter_and_index -> segment_trajectories -> chronological_split ->
/// partition_head_tail.
CheckinDataset prepare_dataset(std::span<const CheckinRecord> records,
                               const PipelineConfig& config = {});

/// Snapshot directory: records.bin, stats.json, splits.tsv, head_tail.tsv.
void write_snapshot(const std::filesystem::path& dir, const CheckinDataset& dataset);
/// Reads the filtered, indexed check-ins back from records.bin (trajectories
/// and splits are recomputed by the pipeline stages).
CheckinDataset read_records_bin(const std::filesystem::path& path);

std::string stats_json(const CheckinDataset& dataset);

/// One next-location prediction: the visited prefix of a trajectory and the
/// location that follows it.
struct PredictionSample {
  int user = 0;
  std::vector<int> prefix;
  int target = 0;

  friend bool operator==(const PredictionSample&, const PredictionSample&) = default;
};

/// Every position t >= 1 of every trajectory in `split` predicts point t from
/// points [0, t), giving sum(len - 1) samples in trajectory order.
std::vector<PredictionSample> expand_samples(const CheckinDataset& dataset, Split split);

}  // namespace hiertail
