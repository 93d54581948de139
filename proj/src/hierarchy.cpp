#include "hiertail/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "hiertail/error.hpp"

namespace hiertail {

std::vector<std::vector<std::uint8_t>> TransitionMatrix::dense() const {
  std::vector<std::vector<std::uint8_t>> out(
      parent.size(), std::vector<std::uint8_t>(parent_count, 0));
  for (std::size_t i = 0; i < parent.size(); ++i) out[i][parent[i]] = 1;
  return out;
}

void ParentMap::add(std::string child, std::string parent_name,
                    std::size_t source_line) {
  pairs.emplace_back(std::move(child), std::move(parent_name));
  line.push_back(source_line);
}

ParentMap parse_mapping(std::string_view text) {
  ParentMap map;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorCode::SchemaError,
                  "expected child<TAB>parent, got '" + std::string(line) + "'",
                  line_no);
    }
    std::string_view child = line.substr(0, tab);
    std::string_view parent = line.substr(tab + 1);
    if (parent.find('\t') != std::string_view::npos) {
      throw Error(ErrorCode::SchemaError, "more than two fields", line_no);
    }
    if (child.empty() || parent.empty()) {
      throw Error(ErrorCode::SchemaError, "empty node name", line_no);
    }
    map.add(std::string(child), std::string(parent), line_no);
  }
  return map;
}

ParentMap read_mapping_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoError, "cannot open mapping file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_mapping(buf.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what(), e.line());
  }
}

void write_mapping_file(const std::filesystem::path& path, const ParentMap& map,
                        std::string_view header_comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoError, "cannot write mapping file " + path.string());
  }
  if (!header_comment.empty()) out << "# " << header_comment << '\n';
  for (const auto& [child, parent] : map.pairs) {
    out << child << '\t' << parent << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

namespace {

std::string describe(const ParentMap& map, std::size_t i) {
  return map.line[i] > 0 ? " (line " + std::to_string(map.line[i]) + ")"
                         : std::string();
}

}  // namespace

LabelHierarchy LabelHierarchy::from_maps(std::span<const ParentMap> maps) {
  if (maps.empty()) {
    throw Error(ErrorCode::EmptyLevel, "a hierarchy needs at least one mapping");
  }
  const int depth = static_cast<int>(maps.size()) + 1;

  for (std::size_t k = 0; k < maps.size(); ++k) {
    if (maps[k].pairs.empty()) {
      throw Error(ErrorCode::EmptyLevel,
                  "mapping into level " + std::to_string(k + 1) + " is empty");
    }
    std::unordered_set<std::string_view> seen;
    for (std::size_t i = 0; i < maps[k].pairs.size(); ++i) {
      const auto& child = maps[k].pairs[i].first;
      if (!seen.insert(child).second) {
        throw Error(ErrorCode::DuplicateChild,
                    "'" + child + "' is mapped more than once" +
                        describe(maps[k], i),
                    maps[k].line[i]);
      }
    }
  }

  std::vector<std::vector<std::string>> names(depth + 1);
  names[0] = {""};
  {
    std::vector<std::string> roots;
    for (const auto& pair : maps[0].pairs) roots.push_back(pair.second);
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end()), roots.end());
    names[1] = std::move(roots);
  }
  for (int level = 2; level <= depth; ++level) {
    auto& level_names = names[level];
    for (const auto& pair : maps[level - 2].pairs) level_names.push_back(pair.first);
    std::sort(level_names.begin(), level_names.end());
  }

  std::vector<std::vector<int>> parents(depth + 1);
  parents[1].assign(names[1].size(), 0);
  for (int level = 2; level <= depth; ++level) {
    const auto& map = maps[level - 2];
    const auto& upper = names[level - 1];
    auto& level_parents = parents[level];
    level_parents.assign(names[level].size(), -1);
    for (std::size_t i = 0; i < map.pairs.size(); ++i) {
      const auto& [child, parent] = map.pairs[i];
      auto it = std::lower_bound(upper.begin(), upper.end(), parent);
      if (it == upper.end() || *it != parent) {
        throw Error(ErrorCode::OrphanNode,
                    "parent '" + parent + "' of '" + child +
                        "' does not exist at level " + std::to_string(level - 1) +
                        describe(map, i),
                    map.line[i]);
      }
      const auto self = std::lower_bound(names[level].begin(), names[level].end(), child);
      level_parents[self - names[level].begin()] =
          static_cast<int>(it - upper.begin());
    }
  }
  for (int level = 1; level < depth; ++level) {
    std::vector<char> has_child(names[level].size(), 0);
    for (int p : parents[level + 1]) has_child[p] = 1;
    for (std::size_t i = 0; i < has_child.size(); ++i) {
      if (!has_child[i]) {
        throw Error(ErrorCode::ChildlessNode,
                    "'" + names[level][i] + "' at level " + std::to_string(level) +
                        " has no children");
      }
    }
  }

  LabelHierarchy h;
  h.names_ = std::move(names);
  h.parents_ = std::move(parents);

  // Derived caches: ancestors, leaf sets, children, transitions.
  const std::size_t leaves = h.names_[depth].size();
  h.ancestors_.assign(depth + 1, std::vector<int>(leaves, 0));
  std::iota(h.ancestors_[depth].begin(), h.ancestors_[depth].end(), 0);
  for (int level = depth - 1; level >= 1; --level) {
    for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
      h.ancestors_[level][leaf] = h.parents_[level + 1][h.ancestors_[level + 1][leaf]];
    }
  }

  h.leaf_order_.resize(depth + 1);
  h.leaf_offset_.resize(depth + 1);
  for (int level = 0; level <= depth; ++level) {
    const auto& anc = h.ancestors_[level];
    const std::size_t n = h.names_[level].size();
    std::vector<std::size_t> offset(n + 1, 0);
    for (int a : anc) ++offset[a + 1];
    std::partial_sum(offset.begin(), offset.end(), offset.begin());
    std::vector<int> order(leaves);
    std::vector<std::size_t> cursor(offset.begin(), offset.end() - 1);
    for (std::size_t leaf = 0; leaf < leaves; ++leaf) {
      order[cursor[anc[leaf]]++] = static_cast<int>(leaf);
    }
    h.leaf_order_[level] = std::move(order);
    h.leaf_offset_[level] = std::move(offset);
  }

  h.child_order_.resize(depth);
  h.child_offset_.resize(depth);
  for (int level = 0; level < depth; ++level) {
    const auto& below = h.parents_[level + 1];
    const std::size_t n = h.names_[level].size();
    std::vector<std::size_t> offset(n + 1, 0);
    for (int p : below) ++offset[p + 1];
    std::partial_sum(offset.begin(), offset.end(), offset.begin());
    std::vector<int> order(below.size());
    std::vector<std::size_t> cursor(offset.begin(), offset.end() - 1);
    for (std::size_t c = 0; c < below.size(); ++c) {
      order[cursor[below[c]]++] = static_cast<int>(c);
    }
    h.child_order_[level] = std::move(order);
    h.child_offset_[level] = std::move(offset);
  }

  for (int level = 2; level <= depth; ++level) {
    TransitionMatrix t;
    t.from_level = level;
    t.to_level = level - 1;
    t.parent_count = h.names_[level - 1].size();
    t.parent = h.parents_[level];
    h.transitions_.push_back(std::move(t));
  }
  return h;
}

std::size_t LabelHierarchy::class_count(int level) const {
  if (level < 0 || level > depth()) {
    throw Error(ErrorCode::InvalidNode, "level " + std::to_string(level) + " out of range");
  }
  return names_[level].size();
}

std::vector<std::size_t> LabelHierarchy::class_counts() const {
  std::vector<std::size_t> out;
  for (int level = 1; level <= depth(); ++level) out.push_back(names_[level].size());
  return out;
}

const std::vector<std::string>& LabelHierarchy::class_names(int level) const {
  class_count(level);
  return names_[level];
}

std::size_t LabelHierarchy::node_count() const {
  std::size_t n = 0;
  for (int level = 1; level <= depth(); ++level) n += names_[level].size();
  return n;
}

std::optional<int> LabelHierarchy::index_of(int level, std::string_view name) const {
  const auto& level_names = class_names(level);
  auto it = std::lower_bound(level_names.begin(), level_names.end(), name);
  if (it == level_names.end() || *it != name) return std::nullopt;
  return static_cast<int>(it - level_names.begin());
}

bool LabelHierarchy::contains(NodeId node) const {
  return node.level >= 0 && node.level <= depth() && node.index >= 0 &&
         static_cast<std::size_t>(node.index) < names_[node.level].size();
}

const std::string& LabelHierarchy::name_of(NodeId node) const {
  if (!contains(node)) throw Error(ErrorCode::InvalidNode, "no such node");
  return names_[node.level][node.index];
}

NodeId LabelHierarchy::parent_of(NodeId node) const {
  if (!contains(node) || node.level == 0) {
    throw Error(ErrorCode::InvalidNode, "node has no parent");
  }
  return {node.level - 1, parents_[node.level][node.index]};
}

void LabelHierarchy::throw_if_invalid_leaf(int leaf) const {
  if (leaf < 0 || static_cast<std::size_t>(leaf) >= leaf_count()) {
    throw Error(ErrorCode::InvalidLeaf, "leaf " + std::to_string(leaf) +
                                            " out of range [0, " +
                                            std::to_string(leaf_count()) + ")");
  }
}

int LabelHierarchy::ancestor(int leaf, int level) const {
  throw_if_invalid_leaf(leaf);
  if (level < 0 || level > depth()) {
    throw Error(ErrorCode::InvalidNode, "level " + std::to_string(level) + " out of range");
  }
  return ancestors_[level][leaf];
}

std::vector<int> LabelHierarchy::path(int leaf) const {
  throw_if_invalid_leaf(leaf);
  std::vector<int> out;
  for (int level = 1; level <= depth(); ++level) out.push_back(ancestors_[level][leaf]);
  return out;
}

std::span<const int> LabelHierarchy::leaves_of(NodeId node) const {
  if (!contains(node)) {
    throw Error(ErrorCode::InvalidNode, "node (" + std::to_string(node.level) + ", " +
                                            std::to_string(node.index) + ") does not exist");
  }
  const auto& offset = leaf_offset_[node.level];
  return std::span<const int>(leaf_order_[node.level])
      .subspan(offset[node.index], offset[node.index + 1] - offset[node.index]);
}

std::span<const int> LabelHierarchy::children_of(NodeId node) const {
  if (!contains(node)) throw Error(ErrorCode::InvalidNode, "no such node");
  if (node.level == depth()) return {};
  const auto& offset = child_offset_[node.level];
  return std::span<const int>(child_order_[node.level])
      .subspan(offset[node.index], offset[node.index + 1] - offset[node.index]);
}

const TransitionMatrix& LabelHierarchy::transition(int from_level) const {
  if (from_level < 2 || from_level > depth()) {
    throw Error(ErrorCode::InvalidNode,
                "no transition from level " + std::to_string(from_level));
  }
  return transitions_[from_level - 2];
}

std::vector<ParentMap> LabelHierarchy::to_maps() const {
  std::vector<ParentMap> maps;
  for (int level = 2; level <= depth(); ++level) {
    ParentMap map;
    for (std::size_t i = 0; i < names_[level].size(); ++i) {
      map.add(names_[level][i], names_[level - 1][parents_[level][i]]);
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

LabelHierarchy LabelHierarchy::restrict_to(std::span<const std::string> leaf_names) const {
  const int H = depth();
  std::vector<std::vector<char>> keep(H + 1);
  for (int level = 0; level <= H; ++level) keep[level].assign(names_[level].size(), 0);
  for (const auto& name : leaf_names) {
    auto idx = index_of(H, name);
    if (!idx) throw Error(ErrorCode::InvalidLeaf, "unknown leaf '" + name + "'");
    for (int level = 1; level <= H; ++level) keep[level][ancestors_[level][*idx]] = 1;
  }
  // Rebuild the maps from kept nodes only; from_maps reassigns indices.
  std::vector<ParentMap> maps;
  for (int level = 2; level <= H; ++level) {
    ParentMap map;
    for (std::size_t i = 0; i < names_[level].size(); ++i) {
      if (!keep[level][i]) continue;
      map.add(names_[level][i], names_[level - 1][parents_[level][i]]);
    }
    maps.push_back(std::move(map));
  }
  return from_maps(maps);
}

LabelHierarchy build_hierarchy(const std::filesystem::path& loc2cat,
                               const std::filesystem::path& cat2act,
                               const std::filesystem::path& act2need) {
  std::vector<ParentMap> maps;
  maps.push_back(read_mapping_file(act2need));
  maps.push_back(read_mapping_file(cat2act));
  maps.push_back(read_mapping_file(loc2cat));
  return LabelHierarchy::from_maps(maps);
}

LcaResult lowest_common_ancestor(const LabelHierarchy& h, int leaf_a, int leaf_b) {
  const int H = h.depth();
  // validates both leaves
  h.ancestor(leaf_a, 0);
  h.ancestor(leaf_b, 0);
  int depth = 0;
  int node = 0;
  for (int level = 1; level <= H; ++level) {
    const int a = h.ancestor(leaf_a, level);
    if (a != h.ancestor(leaf_b, level)) break;
    depth = level;
    node = a;
  }
  return {{depth, node}, depth};
}

int hierarchical_distance(const LabelHierarchy& h, int truth, int predicted) {
  return h.depth() - lowest_common_ancestor(h, truth, predicted).depth;
}

}  // namespace hiertail
