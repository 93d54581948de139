#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hiertail {

/// A node of the label tree. Level 0 is the implicit root (index 0), level
/// depth() holds the leaves (locations).
struct NodeId {
  int level = 0;
  int index = 0;

  friend bool operator==(const NodeId&, const NodeId&) = default;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

/// Child-to-parent assignment between two adjacent levels. Stored as one
/// parent index per child row, which is the authoritative form; dense()
/// materializes the binary row-stochastic matrix.
struct TransitionMatrix {
  int from_level = 0;
  int to_level = 0;
  std::size_t parent_count = 0;
  std::vector<int> parent;

  std::size_t child_count() const { return parent.size(); }
  std::vector<std::vector<std::uint8_t>> dense() const;

  friend bool operator==(const TransitionMatrix&, const TransitionMatrix&) = default;
};

/// (child, parent) pairs read from one mapping file. line[i] is the 1-based
/// source line of pairs[i], or 0 for pairs built in memory.
struct ParentMap {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::size_t> line;

  void add(std::string child, std::string parent, std::size_t source_line = 0);
};

/// Reads a tab-separated `child<TAB>parent` file. Blank lines and lines
/// starting with '#' are skipped.
ParentMap read_mapping_file(const std::filesystem::path& path);
ParentMap parse_mapping(std::string_view text);
void write_mapping_file(const std::filesystem::path& path, const ParentMap& map,
                        std::string_view header_comment = {});

/// Immutable label tree with uniform leaf depth. Node indices within a level
/// follow lexicographic order of the node names.
class LabelHierarchy {
 public:
  /// maps[k] assigns level k+2 nodes to level k+1 parents, i.e. the maps are
  /// ordered from the coarsest pair of levels to the finest. Produces a
  /// hierarchy of depth maps.size() + 1.
  static LabelHierarchy from_maps(std::span<const ParentMap> maps);

  /// Number of labelled levels H (the root is not counted).
  int depth() const { return static_cast<int>(names_.size()) - 1; }
  std::size_t class_count(int level) const;
  std::vector<std::size_t> class_counts() const;
  const std::vector<std::string>& class_names(int level) const;
  std::size_t leaf_count() const { return class_count(depth()); }
  std::size_t node_count() const;

  std::optional<int> index_of(int level, std::string_view name) const;
  const std::string& name_of(NodeId node) const;
  bool contains(NodeId node) const;

  /// Parent of a node at level >= 1; level-1 nodes have the root as parent.
  NodeId parent_of(NodeId node) const;
  /// Index of the level-`level` ancestor of `leaf` (level 0..H).
  int ancestor(int leaf, int level) const;
  /// Root path of a leaf as node indices for levels 1..H.
  std::vector<int> path(int leaf) const;
  std::span<const int> leaves_of(NodeId node) const;
  std::span<const int> children_of(NodeId node) const;

  /// Transition from `from_level` to `from_level - 1`, for 2 <= from_level <= H.
  const TransitionMatrix& transition(int from_level) const;

  /// Same tree with only the listed leaves kept. Internal nodes left without
  /// leaves are pruned and indices are reassigned.
  LabelHierarchy restrict_to(std::span<const std::string> leaf_names) const;

  /// Inverse of from_maps; pairs are emitted in child index order.
  std::vector<ParentMap> to_maps() const;

  friend bool operator==(const LabelHierarchy&, const LabelHierarchy&) = default;

 private:
  void throw_if_invalid_leaf(int leaf) const;

  // names_[level], level 0 holds the single root name "".
  std::vector<std::vector<std::string>> names_;
  // parents_[level][i] for level >= 1.
  std::vector<std::vector<int>> parents_;
  // ancestors_[level][leaf]
  std::vector<std::vector<int>> ancestors_;
  // Leaves of each node, grouped per level: leaf_order_[level] lists all
  // leaves sorted by (ancestor at level, leaf index) and leaf_offset_[level]
  // holds class_count + 1 offsets into it.
  std::vector<std::vector<int>> leaf_order_;
  std::vector<std::vector<std::size_t>> leaf_offset_;
  std::vector<std::vector<int>> child_order_;
  std::vector<std::vector<std::size_t>> child_offset_;
  std::vector<TransitionMatrix> transitions_;
};

LabelHierarchy build_hierarchy(const std::filesystem::path& loc2cat,
                               const std::filesystem::path& cat2act,
                               const std::filesystem::path& act2need);

struct LcaResult {
  NodeId node;
  int depth = 0;
};

/// Deepest node shared by the root paths of two leaves. Root depth is 0,
/// leaf depth is H.
LcaResult lowest_common_ancestor(const LabelHierarchy& h, int leaf_a, int leaf_b);

/// H minus the depth of the lowest common ancestor: 0 for an exact hit, H
/// when the leaves already differ at the coarsest level.
int hierarchical_distance(const LabelHierarchy& h, int truth, int predicted);

}  // namespace hiertail
