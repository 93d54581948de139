#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "hiertail/error.hpp"
#include "hiertail/ingest.hpp"
#include "hiertail/rng.hpp"
#include "oracles.hpp"

using namespace hiertail;

namespace {

CheckinRecord rec(std::string user, std::string loc, std::int64_t ts, std::string cat = "c") {
  return {std::move(user), std::move(loc), 1.0, 2.0, std::move(cat), ts};
}

ErrorCode code_of(const std::function<void()>& fn, std::size_t* line = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (line) *line = e.line();
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ConfigError;
}

std::vector<CheckinRecord> to_records(const CheckinDataset& ds) {
  std::vector<CheckinRecord> out;
  for (const auto& c : ds.checkins) {
    out.push_back({ds.users[c.user], ds.locations[c.location].id, ds.locations[c.location].lat,
                   ds.locations[c.location].lon, ds.categories[c.category], c.timestamp});
  }
  return out;
}

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  auto dir = std::filesystem::temp_directory_path() / "hiertail_test_ingest";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / name, std::ios::binary) << text;
  return dir / name;
}

CheckinDataset indexed(const std::vector<CheckinRecord>& r) {
  return filter_and_index(r, FilterConfig{1, 1});
}

}  // namespace

TEST_CASE("csv parsing") {
  const std::string header = "user_id,loc_id,lat,lon,category,timestamp_utc\n";
  CHECK(parse_checkins_text(header, InputFormat::Csv).records.empty());

  const auto one = parse_checkins_text(header + "u1,l1,10.5,-20.25,Cafe,1600000000\n",
                                       InputFormat::Csv);
  REQUIRE(one.records.size() == 1);
  CHECK(one.records[0] == CheckinRecord{"u1", "l1", 10.5, -20.25, "Cafe", 1600000000});

  const auto reordered = parse_checkins_text(
      "timestamp_utc,category,lon,lat,loc_id,user_id\n5,\"Bar, Pub\",1,2,l,u\n", InputFormat::Csv);
  CHECK(reordered.records[0] == CheckinRecord{"u", "l", 2.0, 1.0, "Bar, Pub", 5});

  std::size_t line = 0;
  CHECK(code_of([&] { parse_checkins_text(header + "u,l,1,1,c,1\nu,l,95,1,c,1\n", InputFormat::Csv); },
                &line) == ErrorCode::ValueError);
  CHECK(line == 3);
  CHECK(code_of([&] { parse_checkins_text(header + "u,l,1,1,c,soon\n", InputFormat::Csv); }) ==
        ErrorCode::ValueError);
  CHECK(code_of([&] { parse_checkins_text(header + "u,l,1,200,c,1\n", InputFormat::Csv); }) ==
        ErrorCode::ValueError);
  CHECK(code_of([&] { parse_checkins_text("user_id,loc_id,lat,lon,category\n", InputFormat::Csv); }) ==
        ErrorCode::SchemaError);
  CHECK(code_of([&] { parse_checkins_text("", InputFormat::Csv); }) == ErrorCode::SchemaError);

  const auto lenient = parse_checkins_text(header + "u,l,1,1,c,1\nu,l,95,1,c,1\nu,l,2,2,c,3\n",
                                           InputFormat::Csv, ParseOptions{false});
  CHECK(lenient.records.size() == 2);
  REQUIRE(lenient.malformed.size() == 1);
  CHECK(lenient.malformed[0].line == 3);
}

TEST_CASE("jsonl parsing") {
  const auto r = parse_checkins_text(
      "{\"user_id\":\"u\",\"loc_id\":\"l\",\"lat\":1.5,\"lon\":2,\"category\":\"c\",\"timestamp_utc\":7}\n\n",
      InputFormat::Jsonl);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0] == CheckinRecord{"u", "l", 1.5, 2.0, "c", 7});
  CHECK(code_of([&] { parse_checkins_text("{\"user_id\":\"u\"}\n", InputFormat::Jsonl); }) ==
        ErrorCode::SchemaError);
  CHECK(code_of([&] { parse_checkins_text("not json\n", InputFormat::Jsonl); }) ==
        ErrorCode::SchemaError);
}

TEST_CASE("file parsing and csv round trip") {
  CHECK(code_of([&] { parse_checkins("/nonexistent/file.csv", InputFormat::Csv); }) ==
        ErrorCode::IoError);
  const std::vector<CheckinRecord> records = {rec("u,1", "l\"x", 3, "Cafe"), rec("u2", "l", 4)};
  const auto path = temp_file("roundtrip.csv", "");
  write_checkins_csv(path, records);
  CHECK(parse_checkins(path, InputFormat::Csv).records == records);
}

TEST_CASE("filter: nothing removed when thresholds hold") {
  std::vector<CheckinRecord> r;
  for (int u = 0; u < 3; ++u) {
    for (int i = 0; i < 100; ++i) r.push_back(rec("u" + std::to_string(u), "l" + std::to_string(i % 5), i));
  }
  const auto ds = filter_and_index(r);
  CHECK(ds.checkins.size() == 300);
  CHECK(ds.users.size() == 3);
  CHECK(ds.filter_rounds == 1);
}

TEST_CASE("filter: one sparse location drops a borderline user") {
  std::vector<CheckinRecord> r;
  for (int i = 0; i < 200; ++i) r.push_back(rec("a", "l" + std::to_string(i % 5), i));
  for (int i = 0; i < 99; ++i) r.push_back(rec("b", "l" + std::to_string(i % 5), i));
  for (int i = 0; i < 14; ++i) r.push_back(rec(i == 0 ? "b" : "a", "rare", 1000 + i));
  const auto ds = filter_and_index(r);
  CHECK(ds.users == std::vector<std::string>{"a"});
  CHECK(ds.location_ids() == std::vector<std::string>{"l0", "l1", "l2", "l3", "l4"});
}

TEST_CASE("filter: three-round cascade reaches the brute-force fixed point") {
  const auto r = oracle::cascade_records();
  const auto ds = filter_and_index(r);
  const auto [users, locs] = oracle::fixed_point_filter(r, 15, 100);
  CHECK(std::set<std::string>(ds.users.begin(), ds.users.end()) == users);
  const auto ids = ds.location_ids();
  CHECK(std::set<std::string>(ids.begin(), ids.end()) == locs);
  CHECK(users == std::set<std::string>{"core"});
  // three removing passes plus the confirming pass
  CHECK(ds.filter_rounds == 4);

  const auto again = filter_and_index(to_records(ds));
  CHECK(again.checkins == ds.checkins);
  CHECK(again.filter_rounds == 1);

  CHECK(code_of([&] { filter_and_index(r, FilterConfig{1000, 1}); }) ==
        ErrorCode::EmptyAfterFilter);
  CHECK(code_of([&] { filter_and_index(std::vector<CheckinRecord>{}); }) ==
        ErrorCode::EmptyAfterFilter);
}

TEST_CASE("filter: random corpora agree with the brute-force fixed point") {
  Rng rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<CheckinRecord> r;
    const int users = 2 + static_cast<int>(rng.below(10));
    for (int u = 0; u < users; ++u) {
      const int n = static_cast<int>(rng.below(25));
      for (int i = 0; i < n; ++i) {
        r.push_back(rec("u" + std::to_string(u), "l" + std::to_string(rng.below(12)), i));
      }
    }
    const FilterConfig cfg{3, 8};
    const auto [users_ok, locs_ok] = oracle::fixed_point_filter(r, cfg.min_location_visits, cfg.min_user_checkins);
    if (users_ok.empty()) {
      CHECK(code_of([&] { filter_and_index(r, cfg); }) == ErrorCode::EmptyAfterFilter);
      continue;
    }
    const auto ds = filter_and_index(r, cfg);
    CHECK(std::set<std::string>(ds.users.begin(), ds.users.end()) == users_ok);
    const auto ids = ds.location_ids();
    CHECK(std::set<std::string>(ids.begin(), ids.end()) == locs_ok);
  }
}

TEST_CASE("location category is the most frequent, smallest name on ties") {
  const std::vector<CheckinRecord> r = {rec("u", "l1", 1, "b"), rec("u", "l1", 2, "a"),
                                        rec("u", "l2", 3, "b"), rec("u", "l2", 4, "b"),
                                        rec("u", "l2", 5, "a")};
  const auto ds = indexed(r);
  CHECK(ds.categories[ds.locations[0].category] == "a");
  CHECK(ds.categories[ds.locations[1].category] == "b");
}

TEST_CASE("segmentation examples") {
  auto one_hour = segment_trajectories(indexed({rec("u", "a", 0), rec("u", "b", 3600)}));
  REQUIRE(one_hour.trajectories.size() == 1);
  CHECK(one_hour.trajectories[0].points.size() == 2);
  auto apart = segment_trajectories(indexed({rec("u", "a", 0), rec("u", "b", 25 * 3600)}));
  CHECK(apart.trajectories.empty());
  // anchored at the window's first check-in, not the previous one
  auto chain = segment_trajectories(
      indexed({rec("u", "a", 0), rec("u", "b", 80000), rec("u", "c", 86400), rec("u", "d", 90000)}));
  REQUIRE(chain.trajectories.size() == 2);
  CHECK(chain.trajectories[1].points.front().timestamp == 86400);
}

TEST_CASE("segmentation matches a linear scan on random timestamps") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<CheckinRecord> r;
    const int users = 1 + static_cast<int>(rng.below(4));
    for (int u = 0; u < users; ++u) {
      const int n = 1 + static_cast<int>(rng.below(40));
      for (int i = 0; i < n; ++i) {
        r.push_back(rec("u" + std::to_string(u), "l" + std::to_string(rng.below(5)),
                        static_cast<std::int64_t>(rng.below(10 * kDaySeconds))));
      }
    }
    const auto ds = segment_trajectories(indexed(r));

    const auto expected = oracle::scan_segments(r, kDaySeconds);
    std::vector<std::pair<std::string, std::vector<std::int64_t>>> got;
    for (const auto& t : ds.trajectories) {
      std::vector<std::int64_t> ts;
      for (const auto& p : t.points) ts.push_back(p.timestamp);
      CHECK(ts.back() - ts.front() < kDaySeconds);
      CHECK(std::is_sorted(ts.begin(), ts.end()));
      got.emplace_back(ds.users[t.user], ts);
    }
    CHECK(got == expected);
  }
}

namespace {

// One user, `days` daily trajectories of two check-ins each.
std::vector<CheckinRecord> daily(const std::string& user, int days, int first_day = 0) {
  std::vector<CheckinRecord> r;
  for (int d = first_day; d < first_day + days; ++d) {
    r.push_back(rec(user, "home", d * kDaySeconds));
    r.push_back(rec(user, "work", d * kDaySeconds + 3600));
  }
  return r;
}

std::vector<Split> splits_of(const CheckinDataset& ds, int user) {
  std::vector<Split> out;
  for (const auto& t : ds.trajectories) {
    if (t.user == user) out.push_back(t.split);
  }
  return out;
}

}  // namespace

TEST_CASE("chronological split under the floor rule") {
  auto r = daily("a", 10);
  const auto b = daily("b", 3);
  r.insert(r.end(), b.begin(), b.end());
  const auto ds = chronological_split(segment_trajectories(indexed(r)));
  using enum Split;
  CHECK(splits_of(ds, 0) == std::vector<Split>{Train, Train, Train, Train, Train, Train, Train, Train, Val, Test});
  CHECK(splits_of(ds, 1) == std::vector<Split>{Train, Train, Test});
  CHECK(ds.dropped_unseen == 0);
  CHECK(ds.trajectory_count(Train) + ds.trajectory_count(Val) + ds.trajectory_count(Test) ==
        ds.trajectories.size());
}

TEST_CASE("val trajectory with a location unseen in train is dropped") {
  auto r = daily("a", 10);
  r[17].loc_id = "only_in_val";  // day 8, second point
  const auto ds = chronological_split(segment_trajectories(indexed(r)));
  CHECK(ds.dropped_unseen == 1);
  CHECK(ds.trajectory_count(Split::Val) == 0);
  CHECK(ds.trajectory_count(Split::Test) == 1);
}

TEST_CASE("user with one trajectory has no train data, so val/test are dropped") {
  const auto ds = chronological_split(segment_trajectories(indexed(daily("a", 1))));
  CHECK(ds.trajectories.empty());
  CHECK(ds.dropped_unseen == 1);
}

namespace {

CheckinDataset with_counts(const std::vector<std::size_t>& counts) {
  CheckinDataset ds;
  ds.locations.resize(counts.size());
  ds.visit_counts = counts;
  return ds;
}

}  // namespace

TEST_CASE("head/tail partition") {
  auto distinct = partition_head_tail(with_counts({5, 9, 1, 7, 3, 2, 8, 4, 6, 10}));
  CHECK(distinct.head_set == std::vector<int>{1, 9});
  auto tie = partition_head_tail(with_counts({3, 5, 5, 5, 1, 1, 1, 1, 1, 1}));
  CHECK(tie.head_set == std::vector<int>{1, 2});
  CHECK(tie.tail_set.size() == 8);
  CHECK(tie.is_head[3] == 0);

  const auto jkt = partition_head_tail(with_counts(std::vector<std::size_t>(7240, 20)));
  CHECK(jkt.head_set.size() == 1448);
  CHECK(jkt.head_set.size() + jkt.tail_set.size() == 7240);
  CHECK(partition_head_tail(with_counts(std::vector<std::size_t>(11, 1))).head_set.size() == 3);
}

namespace {

std::vector<CheckinRecord> random_corpus(Rng& rng) {
  std::vector<CheckinRecord> r;
  for (int u = 0; u < 12; ++u) {
    for (int i = 0; i < 60; ++i) {
      const auto loc = rng.below(20);
      r.push_back({"u" + std::to_string(u), "l" + std::to_string(loc), static_cast<double>(loc),
                   0.5, "c" + std::to_string(loc % 3),
                   static_cast<std::int64_t>(rng.below(20 * kDaySeconds))});
    }
  }
  return r;
}

}  // namespace

TEST_CASE("pipeline output is invariant under record permutation") {
  Rng rng(21);
  auto r = random_corpus(rng);
  PipelineConfig cfg;
  cfg.filter = {5, 30};
  const auto a = prepare_dataset(r, cfg);
  rng.shuffle(std::span<CheckinRecord>(r));
  const auto b = prepare_dataset(r, cfg);
  CHECK(a == b);
  CHECK(stats_json(a) == stats_json(b));
  CHECK(a.head_set.size() == static_cast<std::size_t>(std::ceil(0.2 * a.locations.size())));
  std::size_t min_head = SIZE_MAX, max_tail = 0;
  for (int l : a.head_set) min_head = std::min(min_head, a.visit_counts[l]);
  for (int l : a.tail_set) max_tail = std::max(max_tail, a.visit_counts[l]);
  CHECK(min_head >= max_tail);
}

TEST_CASE("sample expansion and snapshot") {
  Rng rng(22);
  const auto r = random_corpus(rng);
  PipelineConfig cfg;
  cfg.filter = {5, 30};
  const auto ds = prepare_dataset(r, cfg);
  for (auto split : {Split::Train, Split::Val, Split::Test}) {
    std::size_t expected = 0;
    for (const auto& t : ds.trajectories) {
      if (t.split == split) expected += t.points.size() - 1;
    }
    CHECK(expand_samples(ds, split).size() == expected);
  }
  const auto samples = expand_samples(ds, Split::Train);
  REQUIRE(!samples.empty());
  CHECK(samples[0].prefix.size() == 1);
  CHECK(samples[0].target == ds.trajectories[0].points[1].location);

  const auto dir = std::filesystem::temp_directory_path() / "hiertail_test_snapshot";
  write_snapshot(dir, ds);
  for (const char* f : {"records.bin", "stats.json", "splits.tsv", "head_tail.tsv"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const auto back = read_records_bin(dir / "records.bin");
  CHECK(back.checkins == ds.checkins);
  CHECK(back.locations == ds.locations);
  CHECK(back.users == ds.users);
  CHECK(partition_head_tail(chronological_split(segment_trajectories(back))) == ds);
  CHECK(code_of([&] { read_records_bin(dir / "stats.json"); }) == ErrorCode::SchemaError);
}
