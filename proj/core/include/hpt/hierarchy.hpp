#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hpt {

using LabelId = int;

inline constexpr std::string_view kRootName = "Root";

struct LabelNode {
  LabelId id = 0;
  std::string name;
  std::optional<LabelId> parent;  // empty for children of the implicit root
  int depth = 1;
};

struct EdgeRecord {
  std::string parent;
  std::string child;
};

/// Label taxonomy tree under an implicit root. The root itself is not a label:
/// it has no id, no layer and is never predicted. Label names are globally
/// unique. Immutable after construction.
class LabelHierarchy {
 public:
  LabelHierarchy() = default;

  /// Validates the records and assigns ids in first-appearance order.
  /// Throws CycleDetected, MultipleParents, Disconnected or MalformedRecord.
  static LabelHierarchy from_records(std::span<const EdgeRecord> records,
                                     std::string_view root_name = kRootName);

  /// Reads `parent<TAB>child` lines; `#` starts a comment line.
  static LabelHierarchy load(const std::filesystem::path& path);
  static std::vector<EdgeRecord> parse_records(std::string_view text);
  std::vector<EdgeRecord> to_records() const;
  void save(const std::filesystem::path& path) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  /// Maximum depth L.
  int depth() const noexcept { return static_cast<int>(layers_.size()); }

  const LabelNode& node(LabelId id) const;
  const std::vector<LabelNode>& nodes() const noexcept { return nodes_; }
  /// Labels of depth m, 1 <= m <= L, ascending by id.
  const std::vector<LabelId>& layer(int m) const;
  const std::vector<std::vector<LabelId>>& layers() const noexcept { return layers_; }
  const std::vector<LabelId>& children(LabelId id) const;
  /// Children of the implicit root.
  const std::vector<LabelId>& top_level() const noexcept { return top_level_; }
  /// Index of `id` inside its own layer vector.
  int position_in_layer(LabelId id) const;

  std::optional<LabelId> find(std::string_view name) const;
  /// Throws UnknownLabel.
  LabelId id_of(std::string_view name) const;

  /// Parent-to-child edges between labels (root edges excluded).
  std::vector<std::pair<LabelId, LabelId>> edges() const;
  /// `id` followed by its ancestors, deepest first.
  std::vector<LabelId> path_to_root(LabelId id) const;

 private:
  std::vector<LabelNode> nodes_;
  std::vector<std::vector<LabelId>> layers_;
  std::vector<std::vector<LabelId>> children_;
  std::vector<LabelId> top_level_;
  std::vector<int> position_in_layer_;
  std::unordered_map<std::string, LabelId> by_name_;
};

enum class ConnectionScheme { kSameDepth, kDepthIncreasing, kRandom };

std::string_view to_string(ConnectionScheme scheme) noexcept;
/// Accepts `same-depth`, `depth-increasing`, `random`. Throws UnknownScheme.
ConnectionScheme parse_scheme(std::string_view name);

/// Taxonomy plus one virtual node t_i per layer. Node ordering: labels take
/// ids 0..|Y|-1, virtual node t_i takes |Y| + i - 1. Adjacency is undirected
/// and excludes self loops.
struct AugmentedGraph {
  std::size_t num_labels = 0;
  int num_layers = 0;
  ConnectionScheme scheme = ConnectionScheme::kSameDepth;
  std::uint64_t seed = 0;
  std::vector<std::vector<int>> adjacency;
  std::vector<std::pair<int, int>> virtual_edges;  // (virtual node, label)

  std::size_t node_count() const noexcept { return adjacency.size(); }
  int virtual_node(int layer) const { return static_cast<int>(num_labels) + layer - 1; }
  bool adjacent(int u, int v) const;
};

/// Same-depth: t_i ~ labels of depth i. Depth-increasing: t_i ~ labels of depth
/// <= i. Random: same-depth plus one edge per label to another virtual node
/// drawn uniformly from a generator seeded only by `seed` (no extra edge when
/// L = 1).
AugmentedGraph build_augmented_graph(const LabelHierarchy& hier, ConnectionScheme scheme,
                                     std::uint64_t seed = 0);

/// Graph for the single-template layout: one virtual node joined to every label.
AugmentedGraph build_flat_graph(const LabelHierarchy& hier);

/// Positive ids per layer (index m-1 for layer m), ascending. With `closure`
/// every ancestor of a named label is also positive. Throws UnknownLabel.
std::vector<std::vector<LabelId>> positives_per_layer(std::span<const std::string> labels,
                                                      const LabelHierarchy& hier, bool closure);

}  // namespace hpt
