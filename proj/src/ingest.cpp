#include "hiertail/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>
#include <unordered_map>
#include <unordered_set>

#include "hiertail/error.hpp"
#include "json.hpp"

namespace hiertail {

using json = nlohmann::json;

InputFormat parse_input_format(std::string_view name) {
  if (name == "csv") return InputFormat::Csv;
  if (name == "jsonl") return InputFormat::Jsonl;
  throw Error(ErrorCode::ConfigError, "unknown input format '" + std::string(name) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 6> kColumns = {
    "user_id", "loc_id", "lat", "lon", "category", "timestamp_utc"};

std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw Error(ErrorCode::SchemaError, "unterminated quote", line_no);
  fields.push_back(std::move(field));
  return fields;
}

double parse_coordinate(std::string_view text, std::string_view name, double bound,
                        std::size_t line_no) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorCode::ValueError,
                "cannot parse " + std::string(name) + " '" + std::string(text) + "'",
                line_no);
  }
  if (value < -bound || value > bound) {
    throw Error(ErrorCode::ValueError,
                std::string(name) + " " + std::string(text) + " outside [-" +
                    std::to_string(static_cast<int>(bound)) + ", " +
                    std::to_string(static_cast<int>(bound)) + "]",
                line_no);
  }
  return value;
}

std::int64_t parse_timestamp(std::string_view text, std::size_t line_no) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw Error(ErrorCode::ValueError,
                "cannot parse timestamp '" + std::string(text) + "'", line_no);
  }
  if (value < 0) throw Error(ErrorCode::ValueError, "negative timestamp", line_no);
  return value;
}

CheckinRecord make_record(std::string user, std::string loc, std::string_view lat,
                          std::string_view lon, std::string category,
                          std::string_view timestamp, std::size_t line_no) {
  if (user.empty() || loc.empty()) {
    throw Error(ErrorCode::ValueError, "empty user_id or loc_id", line_no);
  }
  CheckinRecord r;
  r.user_id = std::move(user);
  r.loc_id = std::move(loc);
  r.lat = parse_coordinate(lat, "lat", 90.0, line_no);
  r.lon = parse_coordinate(lon, "lon", 180.0, line_no);
  r.category = std::move(category);
  r.timestamp = parse_timestamp(timestamp, line_no);
  return r;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    fn(line, line_no);
  }
}

ParseResult parse_csv(std::string_view text, ParseOptions options) {
  ParseResult result;
  std::optional<std::array<std::size_t, kColumns.size()>> column_of;
  std::size_t width = 0;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (!column_of) {
      if (line.empty()) return;
      const auto header = split_csv_line(line, line_no);
      std::array<std::size_t, kColumns.size()> cols{};
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        auto it = std::find(header.begin(), header.end(), kColumns[c]);
        if (it == header.end()) {
          throw Error(ErrorCode::SchemaError,
                      "missing column '" + std::string(kColumns[c]) + "'", line_no);
        }
        cols[c] = static_cast<std::size_t>(it - header.begin());
      }
      column_of = cols;
      width = header.size();
      return;
    }
    if (line.empty()) return;
    try {
      auto fields = split_csv_line(line, line_no);
      if (fields.size() != width) {
        throw Error(ErrorCode::SchemaError,
                    "expected " + std::to_string(width) + " fields, got " +
                        std::to_string(fields.size()),
                    line_no);
      }
      const auto& col = *column_of;
      result.records.push_back(make_record(std::move(fields[col[0]]),
                                           std::move(fields[col[1]]), fields[col[2]],
                                           fields[col[3]], std::move(fields[col[4]]),
                                           fields[col[5]], line_no));
    } catch (const Error& e) {
      if (options.strict) throw;
      result.malformed.push_back({line_no, e.what()});
    }
  });
  if (!column_of) throw Error(ErrorCode::SchemaError, "missing header row", 1);
  return result;
}

std::string json_field_text(const json& obj, std::string_view key, std::size_t line_no) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) {
    throw Error(ErrorCode::SchemaError, "missing key '" + std::string(key) + "'", line_no);
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<std::int64_t>());
  if (it->is_number()) return it->dump();
  throw Error(ErrorCode::ValueError, "unexpected type for '" + std::string(key) + "'",
              line_no);
}

ParseResult parse_jsonl(std::string_view text, ParseOptions options) {
  ParseResult result;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    try {
      json obj = json::parse(line, nullptr, false);
      if (obj.is_discarded() || !obj.is_object()) {
        throw Error(ErrorCode::SchemaError, "not a JSON object", line_no);
      }
      result.records.push_back(make_record(
          json_field_text(obj, "user_id", line_no), json_field_text(obj, "loc_id", line_no),
          json_field_text(obj, "lat", line_no), json_field_text(obj, "lon", line_no),
          json_field_text(obj, "category", line_no),
          json_field_text(obj, "timestamp_utc", line_no), line_no));
    } catch (const Error& e) {
      if (options.strict) throw;
      result.malformed.push_back({line_no, e.what()});
    }
  });
  return result;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

ParseResult parse_checkins_text(std::string_view text, InputFormat format,
                                ParseOptions options) {
  return format == InputFormat::Csv ? parse_csv(text, options) : parse_jsonl(text, options);
}

ParseResult parse_checkins(const std::filesystem::path& path, InputFormat format,
                           ParseOptions options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed: " + path.string());
  return parse_checkins_text(buf.str(), format, options);
}

void write_checkins_csv(const std::filesystem::path& path,
                        std::span<const CheckinRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "user_id,loc_id,lat,lon,category,timestamp_utc\n";
  for (const auto& r : records) {
    out << csv_escape(r.user_id) << ',' << csv_escape(r.loc_id) << ','
        << format_double(r.lat) << ',' << format_double(r.lon) << ','
        << csv_escape(r.category) << ',' << r.timestamp << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::size_t CheckinDataset::trajectory_count(Split split) const {
  return static_cast<std::size_t>(std::count_if(
      trajectories.begin(), trajectories.end(),
      [split](const Trajectory& t) { return t.split == split; }));
}

std::vector<std::string> CheckinDataset::location_ids() const {
  std::vector<std::string> ids;
  ids.reserve(locations.size());
  for (const auto& loc : locations) ids.push_back(loc.id);
  return ids;
}

CheckinDataset filter_and_index(std::span<const CheckinRecord> records,
                                FilterConfig config) {
  if (records.empty()) {
    throw Error(ErrorCode::EmptyAfterFilter, "no check-in records to filter");
  }
  std::vector<char> alive(records.size(), 1);
  std::size_t rounds = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    ++rounds;
    std::unordered_map<std::string_view, std::size_t> loc_visits;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (alive[i]) ++loc_visits[records[i].loc_id];
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (alive[i] && loc_visits[records[i].loc_id] < config.min_location_visits) {
        alive[i] = 0;
        changed = true;
      }
    }
    std::unordered_map<std::string_view, std::size_t> user_checkins;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (alive[i]) ++user_checkins[records[i].user_id];
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (alive[i] && user_checkins[records[i].user_id] < config.min_user_checkins) {
        alive[i] = 0;
        changed = true;
      }
    }
  }

  CheckinDataset ds;
  ds.filter = config;
  ds.filter_rounds = rounds;

  std::vector<std::string> user_ids, loc_ids, cat_names;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!alive[i]) continue;
    user_ids.push_back(records[i].user_id);
    loc_ids.push_back(records[i].loc_id);
    cat_names.push_back(records[i].category);
  }
  if (user_ids.empty()) {
    throw Error(ErrorCode::EmptyAfterFilter,
                "every record was removed by the visit/check-in thresholds");
  }
  auto dedupe = [](std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedupe(user_ids);
  dedupe(loc_ids);
  dedupe(cat_names);

  auto index_in = [](const std::vector<std::string>& sorted, const std::string& key) {
    return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), key) -
                            sorted.begin());
  };

  ds.users = user_ids;
  ds.categories = cat_names;
  ds.locations.resize(loc_ids.size());
  ds.visit_counts.assign(loc_ids.size(), 0);
  // (location, category) -> count, to pick each location's category.
  std::map<std::pair<int, int>, std::size_t> loc_cat_counts;
  // Coordinates come from the location's earliest check-in, ties broken by
  // (lat, lon), so they do not depend on record order.
  std::vector<std::tuple<std::int64_t, double, double>> first_seen(
      loc_ids.size(), {INT64_MAX, 0.0, 0.0});

  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!alive[i]) continue;
    const auto& r = records[i];
    Checkin c;
    c.user = index_in(user_ids, r.user_id);
    c.location = index_in(loc_ids, r.loc_id);
    c.category = index_in(cat_names, r.category);
    c.timestamp = r.timestamp;
    ds.checkins.push_back(c);
    ++ds.visit_counts[c.location];
    ++loc_cat_counts[{c.location, c.category}];
    first_seen[c.location] = std::min(first_seen[c.location],
                                      std::make_tuple(r.timestamp, r.lat, r.lon));
  }
  for (std::size_t l = 0; l < loc_ids.size(); ++l) {
    ds.locations[l].id = loc_ids[l];
    ds.locations[l].lat = std::get<1>(first_seen[l]);
    ds.locations[l].lon = std::get<2>(first_seen[l]);
  }
  std::vector<std::size_t> best(loc_ids.size(), 0);
  // map iterates categories in ascending index, so strict > keeps the
  // lexicographically smallest category on ties.
  for (const auto& [key, count] : loc_cat_counts) {
    if (count > best[key.first]) {
      best[key.first] = count;
      ds.locations[key.first].category = key.second;
    }
  }

  std::sort(ds.checkins.begin(), ds.checkins.end(), [](const Checkin& a, const Checkin& b) {
    return std::tie(a.user, a.timestamp, a.location, a.category) <
           std::tie(b.user, b.timestamp, b.location, b.category);
  });
  return ds;
}

CheckinDataset segment_trajectories(CheckinDataset dataset, std::int64_t window_seconds) {
  dataset.trajectories.clear();
  Trajectory current;
  auto flush = [&]() {
    if (current.points.size() >= 2) dataset.trajectories.push_back(std::move(current));
    current = Trajectory{};
  };
  for (const auto& c : dataset.checkins) {
    if (!current.points.empty() &&
        (c.user != current.user || c.timestamp - current.start() >= window_seconds)) {
      flush();
    }
    if (current.points.empty()) current.user = c.user;
    current.points.push_back({c.location, c.category, c.timestamp});
  }
  flush();
  return dataset;
}

CheckinDataset chronological_split(CheckinDataset dataset, SplitRatios ratios) {
  auto& trajs = dataset.trajectories;
  std::stable_sort(trajs.begin(), trajs.end(), [](const Trajectory& a, const Trajectory& b) {
    return std::make_pair(a.user, a.start()) < std::make_pair(b.user, b.start());
  });

  std::size_t begin = 0;
  while (begin < trajs.size()) {
    std::size_t end = begin;
    while (end < trajs.size() && trajs[end].user == trajs[begin].user) ++end;
    const std::size_t n = end - begin;
    const auto floor_of = [n](double r) {
      return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9));
    };
    const std::size_t n_train = std::min(n, floor_of(ratios.train));
    const std::size_t n_val = std::min(n - n_train, floor_of(ratios.val));
    for (std::size_t i = 0; i < n; ++i) {
      trajs[begin + i].split =
          i < n_train ? Split::Train : (i < n_train + n_val ? Split::Val : Split::Test);
    }
    begin = end;
  }

  std::unordered_set<int> seen_users, seen_locations;
  for (const auto& t : trajs) {
    if (t.split != Split::Train) continue;
    seen_users.insert(t.user);
    for (const auto& p : t.points) seen_locations.insert(p.location);
  }
  const std::size_t before = trajs.size();
  std::erase_if(trajs, [&](const Trajectory& t) {
    if (t.split == Split::Train) return false;
    if (!seen_users.contains(t.user)) return true;
    return std::any_of(t.points.begin(), t.points.end(), [&](const TrajectoryPoint& p) {
      return !seen_locations.contains(p.location);
    });
  });
  dataset.dropped_unseen = before - trajs.size();
  return dataset;
}

CheckinDataset partition_head_tail(CheckinDataset dataset, double head_fraction) {
  const std::size_t n = dataset.locations.size();
  std::vector<int> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
  const auto& counts = dataset.visit_counts;
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  const auto head_count = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(head_fraction * static_cast<double>(n) - 1e-9)));
  dataset.is_head.assign(n, 0);
  dataset.head_set.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(head_count));
  dataset.tail_set.assign(order.begin() + static_cast<std::ptrdiff_t>(head_count), order.end());
  for (int l : dataset.head_set) dataset.is_head[l] = 1;
  std::sort(dataset.head_set.begin(), dataset.head_set.end());
  std::sort(dataset.tail_set.begin(), dataset.tail_set.end());
  return dataset;
}

CheckinDataset prepare_dataset(std::span<const CheckinRecord> records,
                               const PipelineConfig& config) {
  auto ds = filter_and_index(records, config.filter);
  ds = segment_trajectories(std::move(ds), config.window_seconds);
  ds = chronological_split(std::move(ds), config.ratios);
  return partition_head_tail(std::move(ds), config.head_fraction);
}

std::string stats_json(const CheckinDataset& ds) {
  json j;
  j["users"] = ds.users.size();
  j["locations"] = ds.locations.size();
  j["records"] = ds.checkins.size();
  j["trajectories"] = ds.trajectories.size();
  j["categories"] = ds.categories.size();
  j["splits"] = {{"train", ds.trajectory_count(Split::Train)},
                 {"val", ds.trajectory_count(Split::Val)},
                 {"test", ds.trajectory_count(Split::Test)},
                 {"dropped_unseen", ds.dropped_unseen}};
  j["head_locations"] = ds.head_set.size();
  j["tail_locations"] = ds.tail_set.size();
  j["head_tail_basis"] = "visit counts over the full filtered dataset, before splitting";
  j["filter"] = {{"min_location_visits", ds.filter.min_location_visits},
                 {"min_user_checkins", ds.filter.min_user_checkins},
                 {"rounds", ds.filter_rounds}};
  return j.dump(2) + "\n";
}

std::vector<PredictionSample> expand_samples(const CheckinDataset& dataset, Split split) {
  std::vector<PredictionSample> out;
  for (const auto& t : dataset.trajectories) {
    if (t.split != split) continue;
    for (std::size_t pos = 1; pos < t.points.size(); ++pos) {
      PredictionSample s;
      s.user = t.user;
      s.prefix.reserve(pos);
      for (std::size_t i = 0; i < pos; ++i) s.prefix.push_back(t.points[i].location);
      s.target = t.points[pos].location;
      out.push_back(std::move(s));
    }
  }
  return out;
}

namespace {

constexpr char kRecordsMagic[4] = {'H', 'T', 'R', '1'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::IoError, "truncated records.bin");
  return value;
}

std::string get_string(std::istream& in) {
  const auto n = get<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw Error(ErrorCode::IoError, "truncated records.bin");
  return s;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

}  // namespace

void write_snapshot(const std::filesystem::path& dir, const CheckinDataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  {
    auto out = open_for_write(dir / "records.bin");
    out.write(kRecordsMagic, 4);
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, ds.filter.min_location_visits);
    put<std::uint64_t>(out, ds.filter.min_user_checkins);
    put<std::uint64_t>(out, ds.filter_rounds);
    put<std::uint64_t>(out, ds.users.size());
    for (const auto& u : ds.users) put_string(out, u);
    put<std::uint64_t>(out, ds.categories.size());
    for (const auto& c : ds.categories) put_string(out, c);
    put<std::uint64_t>(out, ds.locations.size());
    for (const auto& l : ds.locations) {
      put_string(out, l.id);
      put<double>(out, l.lat);
      put<double>(out, l.lon);
      put<std::int32_t>(out, l.category);
    }
    put<std::uint64_t>(out, ds.checkins.size());
    for (const auto& c : ds.checkins) {
      put<std::int32_t>(out, c.user);
      put<std::int32_t>(out, c.location);
      put<std::int32_t>(out, c.category);
      put<std::int64_t>(out, c.timestamp);
    }
    if (!out) throw Error(ErrorCode::IoError, "write failed: records.bin");
  }
  {
    auto out = open_for_write(dir / "stats.json");
    out << stats_json(ds);
  }
  {
    auto out = open_for_write(dir / "splits.tsv");
    out << "trajectory\tuser_id\tsplit\tstart_utc\tlength\n";
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
      const auto& t = ds.trajectories[i];
      out << i << '\t' << ds.users[t.user] << '\t' << to_string(t.split) << '\t'
          << t.start() << '\t' << t.points.size() << '\n';
    }
  }
  {
    auto out = open_for_write(dir / "head_tail.tsv");
    out << "loc_id\tvisits\tgroup\n";
    for (std::size_t l = 0; l < ds.locations.size(); ++l) {
      out << ds.locations[l].id << '\t' << ds.visit_counts[l] << '\t'
          << (ds.is_head.empty() ? "unassigned" : (ds.is_head[l] ? "head" : "tail")) << '\n';
    }
  }
}

CheckinDataset read_records_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kRecordsMagic, 4) != 0) {
    throw Error(ErrorCode::SchemaError, path.string() + " is not a records.bin file");
  }
  if (get<std::uint32_t>(in) != 1) {
    throw Error(ErrorCode::SchemaError, "unsupported records.bin version");
  }
  CheckinDataset ds;
  ds.filter.min_location_visits = get<std::uint64_t>(in);
  ds.filter.min_user_checkins = get<std::uint64_t>(in);
  ds.filter_rounds = get<std::uint64_t>(in);
  ds.users.resize(get<std::uint64_t>(in));
  for (auto& u : ds.users) u = get_string(in);
  ds.categories.resize(get<std::uint64_t>(in));
  for (auto& c : ds.categories) c = get_string(in);
  ds.locations.resize(get<std::uint64_t>(in));
  for (auto& l : ds.locations) {
    l.id = get_string(in);
    l.lat = get<double>(in);
    l.lon = get<double>(in);
    l.category = get<std::int32_t>(in);
  }
  ds.checkins.resize(get<std::uint64_t>(in));
  ds.visit_counts.assign(ds.locations.size(), 0);
  for (auto& c : ds.checkins) {
    c.user = get<std::int32_t>(in);
    c.location = get<std::int32_t>(in);
    c.category = get<std::int32_t>(in);
    c.timestamp = get<std::int64_t>(in);
    if (c.location < 0 || static_cast<std::size_t>(c.location) >= ds.locations.size()) {
      throw Error(ErrorCode::SchemaError, "location index out of range in records.bin");
    }
    ++ds.visit_counts[c.location];
  }
  return ds;
}

}  // namespace hiertail
