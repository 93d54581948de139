#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hiertail/error.hpp"
#include "hiertail/hierarchy.hpp"
#include "oracles.hpp"

using namespace hiertail;

namespace {

std::vector<ParentMap> minimal_maps() {
  std::vector<ParentMap> maps(3);
  maps[0].add("act", "need");
  maps[1].add("cat_b", "act");
  maps[1].add("cat_a", "act");
  maps[2].add("loc_2", "cat_b");
  maps[2].add("loc_1", "cat_a");
  return maps;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ConfigError;
}

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  auto dir = std::filesystem::temp_directory_path() / "hiertail_test_hierarchy";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / name) << text;
  return dir / name;
}

}  // namespace

TEST_CASE("minimal tree has class counts 1,1,2,2 and lexicographic indices") {
  const auto h = LabelHierarchy::from_maps(minimal_maps());
  CHECK(h.depth() == 4);
  CHECK(h.class_counts() == std::vector<std::size_t>{1, 1, 2, 2});
  CHECK(h.class_names(3) == std::vector<std::string>{"cat_a", "cat_b"});
  CHECK(h.class_names(4) == std::vector<std::string>{"loc_1", "loc_2"});
  CHECK(h.ancestor(0, 3) == 0);
  CHECK(h.ancestor(1, 3) == 1);
  CHECK(h.path(1) == std::vector<int>{0, 0, 1, 1});
}

TEST_CASE("transition matrices are binary with unit row sums") {
  const auto h = LabelHierarchy::from_maps(minimal_maps());
  for (int level = 2; level <= h.depth(); ++level) {
    const auto dense = h.transition(level).dense();
    CHECK(dense.size() == h.class_count(level));
    for (const auto& row : dense) {
      int sum = 0;
      for (auto v : row) {
        CHECK((v == 0 || v == 1));
        sum += v;
      }
      CHECK(sum == 1);
    }
  }
}

TEST_CASE("construction errors") {
  SUBCASE("duplicate child") {
    auto maps = minimal_maps();
    maps[2].add("loc_1", "cat_b");
    CHECK(code_of([&] { LabelHierarchy::from_maps(maps); }) == ErrorCode::DuplicateChild);
  }
  SUBCASE("orphan") {
    auto maps = minimal_maps();
    maps[2].add("loc_3", "cat_missing");
    CHECK(code_of([&] { LabelHierarchy::from_maps(maps); }) == ErrorCode::OrphanNode);
  }
  SUBCASE("empty level") {
    auto maps = minimal_maps();
    maps[1] = ParentMap{};
    CHECK(code_of([&] { LabelHierarchy::from_maps(maps); }) == ErrorCode::EmptyLevel);
  }
  SUBCASE("childless interior node") {
    auto maps = minimal_maps();
    maps[1].add("cat_c", "act");
    CHECK(code_of([&] { LabelHierarchy::from_maps(maps); }) == ErrorCode::ChildlessNode);
  }
}

TEST_CASE("mapping files: comments, blank lines, line numbers in errors") {
  const auto act = write_temp("act2need.tsv", "# activity\tneed\n\nact\tneed\n");
  const auto cat = write_temp("cat2act.tsv", "cat_a\tact\ncat_b\tact\n");
  const auto loc = write_temp("loc2cat.tsv", "loc_1\tcat_a\r\nloc_2\tcat_b\n");
  const auto h = build_hierarchy(loc, cat, act);
  CHECK(h.class_counts() == std::vector<std::size_t>{1, 1, 2, 2});
  CHECK(h == LabelHierarchy::from_maps(minimal_maps()));

  const auto dup = write_temp("dup.tsv", "loc_1\tcat_a\n# c\nloc_1\tcat_b\n");
  try {
    build_hierarchy(dup, cat, act);
    FAIL("expected DuplicateChild");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DuplicateChild);
    CHECK(e.line() == 3);
  }
  const auto bad = write_temp("bad.tsv", "loc_1 cat_a\n");
  CHECK(code_of([&] { build_hierarchy(bad, cat, act); }) == ErrorCode::SchemaError);
  CHECK(code_of([&] { build_hierarchy("/nonexistent/x.tsv", cat, act); }) == ErrorCode::IoError);
}

TEST_CASE("lca and hierarchical distance on the minimal tree") {
  const auto h = LabelHierarchy::from_maps(minimal_maps());
  const auto same = lowest_common_ancestor(h, 1, 1);
  CHECK(same.depth == 4);
  CHECK(same.node == NodeId{4, 1});
  const auto diff = lowest_common_ancestor(h, 0, 1);
  CHECK(diff.depth == 2);
  CHECK(diff.node == NodeId{2, 0});
  CHECK(hierarchical_distance(h, 0, 0) == 0);
  CHECK(hierarchical_distance(h, 0, 1) == 2);
  CHECK(code_of([&] { lowest_common_ancestor(h, 0, 2); }) == ErrorCode::InvalidLeaf);
  CHECK(code_of([&] { hierarchical_distance(h, -1, 0); }) == ErrorCode::InvalidLeaf);
}

TEST_CASE("shared category gives LCA depth H-1; same need different activity gives 3") {
  std::vector<ParentMap> maps(3);
  maps[0].add("a1", "n");
  maps[0].add("a2", "n");
  maps[1].add("c1", "a1");
  maps[1].add("c2", "a2");
  maps[2].add("l1", "c1");
  maps[2].add("l2", "c1");
  maps[2].add("l3", "c2");
  const auto h = LabelHierarchy::from_maps(maps);
  const auto lca = lowest_common_ancestor(h, 0, 1);
  CHECK(lca.depth == 3);
  CHECK(lca.node == NodeId{3, 0});
  CHECK(hierarchical_distance(h, 0, 2) == 3);
}

TEST_CASE("leaves_of: leaf singleton, root-level node covers all, invalid node") {
  const auto h = LabelHierarchy::from_maps(minimal_maps());
  auto leaf = h.leaves_of({4, 1});
  CHECK(std::vector<int>(leaf.begin(), leaf.end()) == std::vector<int>{1});
  auto top = h.leaves_of({1, 0});
  CHECK(std::vector<int>(top.begin(), top.end()) == std::vector<int>{0, 1});
  auto root = h.leaves_of({0, 0});
  CHECK(root.size() == 2);
  CHECK(code_of([&] { h.leaves_of({3, 5}); }) == ErrorCode::InvalidNode);
}

TEST_CASE("random trees: tree queries match brute force over named root paths") {
  Rng rng(7);
  for (int trial = 0; trial < 60; ++trial) {
    const int depth = 2 + static_cast<int>(rng.below(3));
    const auto maps = oracle::random_maps(rng, depth, 40);
    const auto h = LabelHierarchy::from_maps(maps);
    const oracle::NameTree tree(maps);
    const auto& leaf_names = h.class_names(depth);

    // leaves_of equals exhaustive filter; children partition the parent's set
    for (int level = 0; level <= depth; ++level) {
      for (std::size_t i = 0; i < h.class_count(level); ++i) {
        const NodeId node{level, static_cast<int>(i)};
        std::set<std::string> got;
        for (int leaf : h.leaves_of(node)) got.insert(leaf_names[leaf]);
        CHECK(got == tree.leaves_under(level, h.name_of(node)));
        if (level < depth) {
          std::size_t total = 0;
          std::set<int> uni;
          for (int c : h.children_of(node)) {
            auto s = h.leaves_of({level + 1, c});
            total += s.size();
            uni.insert(s.begin(), s.end());
          }
          CHECK(total == h.leaves_of(node).size());
          CHECK(uni.size() == total);
        }
      }
    }
    // composed transitions send each leaf to exactly one level-1 class
    for (std::size_t leaf = 0; leaf < h.leaf_count(); ++leaf) {
      int node = static_cast<int>(leaf);
      for (int level = depth; level >= 2; --level) node = h.transition(level).parent[node];
      CHECK(node == h.ancestor(static_cast<int>(leaf), 1));
      CHECK(h.name_of({1, node}) == tree.path(leaf_names[leaf])[0]);
    }
    // lca and distance against path prefixes
    for (int pair = 0; pair < 50; ++pair) {
      const int a = static_cast<int>(rng.below(h.leaf_count()));
      const int b = static_cast<int>(rng.below(h.leaf_count()));
      const int expected = oracle::common_prefix_depth(tree, leaf_names[a], leaf_names[b]);
      CHECK(lowest_common_ancestor(h, a, b).depth == expected);
      CHECK(hierarchical_distance(h, a, b) == depth - expected);
      CHECK(hierarchical_distance(h, a, b) == hierarchical_distance(h, b, a));
      CHECK((hierarchical_distance(h, a, b) == 0) == (a == b));
    }
  }
}

TEST_CASE("construction is deterministic under input order") {
  Rng rng(3);
  auto maps = oracle::random_maps(rng, 4, 30);
  const auto h1 = LabelHierarchy::from_maps(maps);
  for (auto& m : maps) {
    std::reverse(m.pairs.begin(), m.pairs.end());
    std::reverse(m.line.begin(), m.line.end());
  }
  CHECK(LabelHierarchy::from_maps(maps) == h1);
  CHECK(LabelHierarchy::from_maps(h1.to_maps()) == h1);
}

TEST_CASE("restrict_to prunes empty branches and reindexes") {
  std::vector<ParentMap> maps(2);
  maps[0].add("c1", "n1");
  maps[0].add("c2", "n2");
  maps[1].add("l1", "c1");
  maps[1].add("l2", "c2");
  maps[1].add("l3", "c2");
  const auto h = LabelHierarchy::from_maps(maps);
  const std::vector<std::string> keep = {"l2", "l3"};
  const auto r = h.restrict_to(keep);
  CHECK(r.class_counts() == std::vector<std::size_t>{1, 1, 2});
  CHECK(r.class_names(1) == std::vector<std::string>{"n2"});
  const std::vector<std::string> unknown = {"zz"};
  CHECK(code_of([&] { h.restrict_to(unknown); }) == ErrorCode::InvalidLeaf);
}
