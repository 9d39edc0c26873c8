#include "hpt/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "hpt/error.hpp"

namespace hpt {
namespace {

constexpr LabelId kRootParent = -1;
constexpr LabelId kNoParent = -2;

std::string_view trim(std::string_view s) {
  const auto not_space = [](char c) { return c != ' ' && c != '\r' && c != '\n' && c != '\t'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

LabelHierarchy LabelHierarchy::from_records(std::span<const EdgeRecord> records, std::string_view root_name) {
  if (records.empty()) throw Error(ErrorKind::kMalformedRecord, "taxonomy has no edges");

  LabelHierarchy h;
  std::vector<LabelId> parent_of;
  auto intern = [&](const std::string& name) {
    auto [it, inserted] = h.by_name_.try_emplace(name, static_cast<LabelId>(h.nodes_.size()));
    if (inserted) {
      LabelNode n;
      n.id = it->second;
      n.name = name;
      h.nodes_.push_back(std::move(n));
      parent_of.push_back(kNoParent);
    }
    return it->second;
  };

  bool root_seen = false;
  for (const auto& r : records) {
    if (r.parent.empty() || r.child.empty()) {
      throw Error(ErrorKind::kMalformedRecord, "empty label name in edge '" + r.parent + "' -> '" + r.child + "'");
    }
    if (r.child == root_name) {
      throw Error(ErrorKind::kCycleDetected, "edge '" + r.parent + "' -> root");
    }
    if (r.parent == r.child) {
      throw Error(ErrorKind::kCycleDetected, "self loop on '" + r.child + "'");
    }
    LabelId parent = kRootParent;
    if (r.parent == root_name) {
      root_seen = true;
    } else {
      parent = intern(r.parent);
    }
    const LabelId child = intern(r.child);
    auto& slot = parent_of[static_cast<std::size_t>(child)];
    if (slot != kNoParent && slot != parent) {
      throw Error(ErrorKind::kMultipleParents, "'" + r.child + "' has more than one parent");
    }
    slot = parent;
  }
  if (!root_seen) {
    throw Error(ErrorKind::kDisconnected, "no edge leaves the root '" + std::string(root_name) + "'");
  }

  // Walk each node to the root; a repeated node is a cycle, a dead end is a
  // node hanging off something other than the root.
  const std::size_t n = h.nodes_.size();
  std::vector<int> depth(n, 0);
  for (std::size_t start = 0; start < n; ++start) {
    if (depth[start] != 0) continue;
    std::vector<LabelId> chain;
    std::vector<char> on_chain(n, 0);
    LabelId cur = static_cast<LabelId>(start);
    int base = 0;
    while (true) {
      if (on_chain[static_cast<std::size_t>(cur)]) {
        throw Error(ErrorKind::kCycleDetected, "cycle through '" + h.nodes_[static_cast<std::size_t>(cur)].name + "'");
      }
      if (depth[static_cast<std::size_t>(cur)] != 0) {
        base = depth[static_cast<std::size_t>(cur)];
        break;
      }
      on_chain[static_cast<std::size_t>(cur)] = 1;
      chain.push_back(cur);
      const LabelId p = parent_of[static_cast<std::size_t>(cur)];
      if (p == kRootParent) break;
      if (p == kNoParent) {
        throw Error(ErrorKind::kDisconnected,
                    "'" + h.nodes_[static_cast<std::size_t>(cur)].name + "' is not reachable from the root");
      }
      cur = p;
    }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) depth[static_cast<std::size_t>(*it)] = ++base;
  }

  h.children_.assign(n, {});
  int max_depth = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = h.nodes_[i];
    node.depth = depth[i];
    max_depth = std::max(max_depth, node.depth);
    if (parent_of[i] >= 0) {
      node.parent = parent_of[i];
      h.children_[static_cast<std::size_t>(parent_of[i])].push_back(node.id);
    } else {
      h.top_level_.push_back(node.id);
    }
  }
  h.layers_.assign(static_cast<std::size_t>(max_depth), {});
  h.position_in_layer_.assign(n, 0);
  for (const auto& node : h.nodes_) {
    auto& layer = h.layers_[static_cast<std::size_t>(node.depth - 1)];
    h.position_in_layer_[static_cast<std::size_t>(node.id)] = static_cast<int>(layer.size());
    layer.push_back(node.id);
  }
  return h;
}

std::vector<EdgeRecord> LabelHierarchy::parse_records(std::string_view text) {
  std::vector<EdgeRecord> records;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || line.find('\t', tab + 1) != std::string_view::npos) {
      throw Error(ErrorKind::kMalformedRecord, "taxonomy line " + std::to_string(line_no) + " is not parent<TAB>child");
    }
    records.push_back({std::string(trim(line.substr(0, tab))), std::string(trim(line.substr(tab + 1)))});
  }
  return records;
}

LabelHierarchy LabelHierarchy::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open taxonomy '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto records = parse_records(buf.str());
  return from_records(records);
}

std::vector<EdgeRecord> LabelHierarchy::to_records() const {
  std::vector<EdgeRecord> out;
  out.reserve(nodes_.size());
  for (const auto& n : nodes_) {
    const std::string parent = n.parent ? nodes_[static_cast<std::size_t>(*n.parent)].name : std::string(kRootName);
    out.push_back({parent, n.name});
  }
  return out;
}

void LabelHierarchy::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write taxonomy '" + path.string() + "'");
  for (const auto& r : to_records()) out << r.parent << '\t' << r.child << '\n';
}

const LabelNode& LabelHierarchy::node(LabelId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
    throw Error(ErrorKind::kUnknownLabel, "label id " + std::to_string(id));
  }
  return nodes_[static_cast<std::size_t>(id)];
}

const std::vector<LabelId>& LabelHierarchy::layer(int m) const {
  if (m < 1 || m > depth()) {
    throw Error(ErrorKind::kLayerOutOfRange, "layer " + std::to_string(m) + " outside 1.." + std::to_string(depth()));
  }
  return layers_[static_cast<std::size_t>(m - 1)];
}

const std::vector<LabelId>& LabelHierarchy::children(LabelId id) const {
  node(id);
  return children_[static_cast<std::size_t>(id)];
}

int LabelHierarchy::position_in_layer(LabelId id) const {
  node(id);
  return position_in_layer_[static_cast<std::size_t>(id)];
}

std::optional<LabelId> LabelHierarchy::find(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

LabelId LabelHierarchy::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw Error(ErrorKind::kUnknownLabel, "'" + std::string(name) + "'");
}

std::vector<std::pair<LabelId, LabelId>> LabelHierarchy::edges() const {
  std::vector<std::pair<LabelId, LabelId>> out;
  for (const auto& n : nodes_) {
    if (n.parent) out.emplace_back(*n.parent, n.id);
  }
  return out;
}

std::vector<LabelId> LabelHierarchy::path_to_root(LabelId id) const {
  std::vector<LabelId> path;
  std::optional<LabelId> cur = id;
  while (cur) {
    path.push_back(*cur);
    cur = node(*cur).parent;
  }
  return path;
}

std::string_view to_string(ConnectionScheme scheme) noexcept {
  switch (scheme) {
    case ConnectionScheme::kSameDepth: return "same-depth";
    case ConnectionScheme::kDepthIncreasing: return "depth-increasing";
    case ConnectionScheme::kRandom: return "random";
  }
  return "unknown";
}

ConnectionScheme parse_scheme(std::string_view name) {
  if (name == "same-depth") return ConnectionScheme::kSameDepth;
  if (name == "depth-increasing") return ConnectionScheme::kDepthIncreasing;
  if (name == "random") return ConnectionScheme::kRandom;
  throw Error(ErrorKind::kUnknownScheme, "'" + std::string(name) + "'");
}

bool AugmentedGraph::adjacent(int u, int v) const {
  const auto& nb = adjacency[static_cast<std::size_t>(u)];
  return std::find(nb.begin(), nb.end(), v) != nb.end();
}

namespace {

void connect(AugmentedGraph& g, int u, int v) {
  if (u == v || g.adjacent(u, v)) return;
  g.adjacency[static_cast<std::size_t>(u)].push_back(v);
  g.adjacency[static_cast<std::size_t>(v)].push_back(u);
}

AugmentedGraph base_graph(const LabelHierarchy& hier, int virtual_nodes) {
  AugmentedGraph g;
  g.num_labels = hier.size();
  g.num_layers = virtual_nodes;
  g.adjacency.assign(hier.size() + static_cast<std::size_t>(virtual_nodes), {});
  for (const auto& [p, c] : hier.edges()) connect(g, p, c);
  return g;
}

void add_virtual_edge(AugmentedGraph& g, int layer, LabelId label) {
  const int t = g.virtual_node(layer);
  if (g.adjacent(t, label)) return;
  connect(g, t, label);
  g.virtual_edges.emplace_back(t, label);
}

}  // namespace

AugmentedGraph build_augmented_graph(const LabelHierarchy& hier, ConnectionScheme scheme, std::uint64_t seed) {
  const int depth = hier.depth();
  AugmentedGraph g = base_graph(hier, depth);
  g.scheme = scheme;
  g.seed = seed;
  for (int i = 1; i <= depth; ++i) {
    switch (scheme) {
      case ConnectionScheme::kSameDepth:
      case ConnectionScheme::kRandom:
        for (LabelId y : hier.layer(i)) add_virtual_edge(g, i, y);
        break;
      case ConnectionScheme::kDepthIncreasing:
        for (int j = 1; j <= i; ++j) {
          for (LabelId y : hier.layer(j)) add_virtual_edge(g, i, y);
        }
        break;
    }
  }
  if (scheme == ConnectionScheme::kRandom && depth > 1) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(1, depth - 1);
    for (const auto& node : hier.nodes()) {
      // Uniform over the other L-1 virtual nodes.
      int layer = pick(rng);
      if (layer >= node.depth) ++layer;
      add_virtual_edge(g, layer, node.id);
    }
  }
  return g;
}

AugmentedGraph build_flat_graph(const LabelHierarchy& hier) {
  AugmentedGraph g = base_graph(hier, 1);
  for (const auto& node : hier.nodes()) add_virtual_edge(g, 1, node.id);
  return g;
}

std::vector<std::vector<LabelId>> positives_per_layer(std::span<const std::string> labels,
                                                      const LabelHierarchy& hier, bool closure) {
  std::vector<std::set<LabelId>> sets(static_cast<std::size_t>(hier.depth()));
  for (const auto& name : labels) {
    const LabelId id = hier.id_of(name);
    if (closure) {
      for (LabelId a : hier.path_to_root(id)) sets[static_cast<std::size_t>(hier.node(a).depth - 1)].insert(a);
    } else {
      sets[static_cast<std::size_t>(hier.node(id).depth - 1)].insert(id);
    }
  }
  std::vector<std::vector<LabelId>> out;
  out.reserve(sets.size());
  for (const auto& s : sets) out.emplace_back(s.begin(), s.end());
  return out;
}

}  // namespace hpt
