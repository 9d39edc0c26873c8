#include <doctest.h>

#include <map>
#include <queue>
#include <set>

#include "hpt/error.hpp"
#include "hpt/hierarchy.hpp"
#include "support.hpp"

using namespace hpt;

namespace {

// Depth of every child name by breadth-first search from Root.
std::map<std::string, int> bfs_depths(const std::vector<EdgeRecord>& records) {
  std::map<std::string, std::vector<std::string>> kids;
  for (const auto& r : records) kids[r.parent].push_back(r.child);
  std::map<std::string, int> depth;
  std::queue<std::string> q;
  q.push("Root");
  depth["Root"] = 0;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (const auto& v : kids[u]) {
      depth[v] = depth[u] + 1;
      q.push(v);
    }
  }
  depth.erase("Root");
  return depth;
}

ErrorKind kind_of(const std::vector<EdgeRecord>& records) {
  try {
    LabelHierarchy::from_records(records);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIoError;
}

std::set<int> neighbours(const AugmentedGraph& g, int u) {
  return {g.adjacency[static_cast<std::size_t>(u)].begin(), g.adjacency[static_cast<std::size_t>(u)].end()};
}

}  // namespace

TEST_SUITE("hierarchy") {

TEST_CASE("single record gives one label on one layer") {
  const std::vector<EdgeRecord> r{{"Root", "A"}};
  const auto h = LabelHierarchy::from_records(r);
  CHECK(h.size() == 1);
  CHECK(h.depth() == 1);
  REQUIRE(h.layers().size() == 1);
  CHECK(h.layer(1) == std::vector<LabelId>{h.id_of("A")});
  CHECK_FALSE(h.node(0).parent.has_value());
}

TEST_CASE("seven-node tree depths match breadth-first search") {
  const auto records = hpt::test::seven_node_records();
  const auto h = LabelHierarchy::from_records(records);
  CHECK(h.depth() == 2);
  const auto expected = bfs_depths(records);
  for (const auto& [name, d] : expected) CHECK(h.node(h.id_of(name)).depth == d);
  std::set<std::string> l1;
  std::set<std::string> l2;
  for (LabelId id : h.layer(1)) l1.insert(h.node(id).name);
  for (LabelId id : h.layer(2)) l2.insert(h.node(id).name);
  CHECK(l1 == std::set<std::string>{"A", "B"});
  CHECK(l2 == std::set<std::string>{"A1", "A2", "B1", "B2"});
}

TEST_CASE("ids follow first appearance and loading is deterministic") {
  const std::vector<EdgeRecord> r{{"Root", "Z"}, {"Z", "M"}, {"Root", "A"}, {"A", "B"}};
  const auto h1 = LabelHierarchy::from_records(r);
  const auto h2 = LabelHierarchy::from_records(r);
  CHECK(h1.id_of("Z") == 0);
  CHECK(h1.id_of("M") == 1);
  CHECK(h1.id_of("A") == 2);
  CHECK(h1.id_of("B") == 3);
  for (std::size_t i = 0; i < h1.size(); ++i) CHECK(h1.node(static_cast<LabelId>(i)).name == h2.node(static_cast<LabelId>(i)).name);
}

TEST_CASE("children of a parent listed later are placed correctly") {
  const std::vector<EdgeRecord> r{{"A", "A1"}, {"Root", "A"}};
  const auto h = LabelHierarchy::from_records(r);
  CHECK(h.node(h.id_of("A1")).depth == 2);
  CHECK(h.node(h.id_of("A1")).parent == h.id_of("A"));
}

TEST_CASE("validation errors") {
  CHECK(kind_of({{"Root", "A"}, {"Root", "B"}, {"A", "C"}, {"B", "C"}}) == ErrorKind::kMultipleParents);
  CHECK(kind_of({{"Root", "A"}, {"B", "C"}, {"C", "B"}}) == ErrorKind::kCycleDetected);
  CHECK(kind_of({{"Root", "A"}, {"A", "A"}}) == ErrorKind::kCycleDetected);
  CHECK(kind_of({{"Root", "A"}, {"X", "Y"}}) == ErrorKind::kDisconnected);
  CHECK(kind_of({{"X", "Y"}}) == ErrorKind::kDisconnected);
  CHECK(kind_of({}) == ErrorKind::kMalformedRecord);
  CHECK(kind_of({{"Root", ""}}) == ErrorKind::kMalformedRecord);
}

TEST_CASE("unknown label lookup throws") {
  const auto h = hpt::test::seven_node_tree();
  CHECK_FALSE(h.find("nope").has_value());
  CHECK_THROWS_AS(h.id_of("nope"), Error);
  CHECK_THROWS_AS(h.layer(3), Error);
  CHECK_THROWS_AS(h.layer(0), Error);
}

TEST_CASE("taxonomy text round trip with comments") {
  const auto records = LabelHierarchy::parse_records("# comment\nRoot\tA\n\nA\tA1\nRoot\tB\n");
  REQUIRE(records.size() == 3);
  CHECK(records[1].parent == "A");
  CHECK(records[1].child == "A1");
  const auto h = LabelHierarchy::from_records(records);
  const auto back = h.to_records();
  const auto h2 = LabelHierarchy::from_records(back);
  CHECK(h2.size() == h.size());
  for (const auto& n : h.nodes()) CHECK(h2.node(h2.id_of(n.name)).depth == n.depth);
  CHECK_THROWS_AS(LabelHierarchy::parse_records("Root A\n"), Error);
}

TEST_CASE("random trees: partition, depth and parent invariants") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const auto records = hpt::test::random_tree_records(1 + trial, rng);
    const auto h = LabelHierarchy::from_records(records);
    std::size_t total = 0;
    std::set<LabelId> seen;
    int max_depth = 0;
    for (int m = 1; m <= h.depth(); ++m) {
      total += h.layer(m).size();
      for (LabelId id : h.layer(m)) {
        CHECK(seen.insert(id).second);
        CHECK(h.node(id).depth == m);
      }
    }
    CHECK(total == h.size());
    for (const auto& n : h.nodes()) {
      max_depth = std::max(max_depth, n.depth);
      if (n.parent) CHECK(h.node(*n.parent).depth + 1 == n.depth);
      else CHECK(n.depth == 1);
    }
    CHECK(max_depth == h.depth());
    const auto expected = bfs_depths(records);
    for (const auto& [name, d] : expected) CHECK(h.node(h.id_of(name)).depth == d);
  }
}

TEST_CASE("same-depth augmentation on the seven-node tree") {
  const auto h = hpt::test::seven_node_tree();
  const auto g = build_augmented_graph(h, ConnectionScheme::kSameDepth);
  CHECK(g.node_count() == h.size() + 2);
  std::set<int> t1;
  std::set<int> t2;
  for (const char* n : {"A", "B"}) t1.insert(h.id_of(n));
  for (const char* n : {"A1", "A2", "B1", "B2"}) t2.insert(h.id_of(n));
  CHECK(neighbours(g, g.virtual_node(1)) == t1);
  CHECK(neighbours(g, g.virtual_node(2)) == t2);
  for (const auto& [p, c] : h.edges()) CHECK(g.adjacent(p, c));
  CHECK(g.adjacent(h.id_of("A1"), h.id_of("A")));
  CHECK_FALSE(g.adjacent(h.id_of("A1"), h.id_of("B")));
}

TEST_CASE("same-depth virtual nodes share no neighbour") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto records = hpt::test::random_tree_records(3 + trial, rng);
    const auto h = LabelHierarchy::from_records(records);
    const auto g = build_augmented_graph(h, ConnectionScheme::kSameDepth);
    for (int i = 1; i <= h.depth(); ++i) {
      for (int j = i + 1; j <= h.depth(); ++j) {
        const auto a = neighbours(g, g.virtual_node(i));
        const auto b = neighbours(g, g.virtual_node(j));
        for (int x : a) CHECK(b.count(x) == 0);
      }
    }
  }
}

TEST_CASE("depth-increasing degree equals count of shallower labels") {
  const std::vector<EdgeRecord> r{{"Root", "A"}, {"Root", "B"}, {"A", "C"}, {"A", "D"},
                                  {"B", "E"},    {"C", "F"},    {"C", "G"}, {"E", "H"}};
  const auto h = LabelHierarchy::from_records(r);
  REQUIRE(h.depth() == 3);
  const auto g = build_augmented_graph(h, ConnectionScheme::kDepthIncreasing);
  const auto depths = bfs_depths(r);
  for (int i = 1; i <= 3; ++i) {
    std::size_t expected = 0;
    for (const auto& [name, d] : depths) expected += d <= i ? 1 : 0;
    CHECK(neighbours(g, g.virtual_node(i)).size() == expected);
    for (int u : neighbours(g, g.virtual_node(i))) CHECK(h.node(u).depth <= i);
  }
  CHECK(neighbours(g, g.virtual_node(3)).size() == h.layer(1).size() + h.layer(2).size() + h.layer(3).size());
}

TEST_CASE("random connection adds exactly one extra virtual edge per label") {
  std::mt19937_64 rng(3);
  const auto records = hpt::test::random_tree_records(25, rng);
  const auto h = LabelHierarchy::from_records(records);
  REQUIRE(h.depth() >= 2);
  const auto g = build_augmented_graph(h, ConnectionScheme::kRandom, 7);
  const auto again = build_augmented_graph(h, ConnectionScheme::kRandom, 7);
  CHECK(g.adjacency == again.adjacency);
  CHECK(g.virtual_edges == again.virtual_edges);
  for (const auto& n : h.nodes()) {
    int virtual_links = 0;
    bool own_layer = false;
    for (int i = 1; i <= h.depth(); ++i) {
      if (g.adjacent(n.id, g.virtual_node(i))) {
        ++virtual_links;
        own_layer = own_layer || i == n.depth;
      }
    }
    CHECK(own_layer);
    CHECK(virtual_links == 2);
  }
  CHECK(g.virtual_edges.size() == 2 * h.size());
  for (const auto& [p, c] : h.edges()) CHECK(g.adjacent(p, c));
  bool differs = false;
  for (std::uint64_t s = 8; s < 20 && !differs; ++s) {
    differs = build_augmented_graph(h, ConnectionScheme::kRandom, s).adjacency != g.adjacency;
  }
  CHECK(differs);
}

TEST_CASE("random connection on a single layer adds nothing") {
  const std::vector<EdgeRecord> r{{"Root", "A"}, {"Root", "B"}};
  const auto h = LabelHierarchy::from_records(r);
  const auto g = build_augmented_graph(h, ConnectionScheme::kRandom, 1);
  CHECK(g.adjacency == build_augmented_graph(h, ConnectionScheme::kSameDepth).adjacency);
}

TEST_CASE("scheme names parse") {
  CHECK(parse_scheme("same-depth") == ConnectionScheme::kSameDepth);
  CHECK(parse_scheme("depth-increasing") == ConnectionScheme::kDepthIncreasing);
  CHECK(parse_scheme("random") == ConnectionScheme::kRandom);
  CHECK(to_string(ConnectionScheme::kRandom) == "random");
  try {
    parse_scheme("star");
    FAIL("expected UnknownScheme");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnknownScheme);
  }
}

TEST_CASE("flat graph joins one virtual node to every label") {
  const auto h = hpt::test::seven_node_tree();
  const auto g = build_flat_graph(h);
  CHECK(g.node_count() == h.size() + 1);
  CHECK(neighbours(g, g.virtual_node(1)).size() == h.size());
}

TEST_CASE("positives per layer") {
  const auto h = hpt::test::seven_node_tree();
  const std::vector<std::string> none;
  for (const auto& layer : positives_per_layer(none, h, true)) CHECK(layer.empty());

  const std::vector<std::string> a1{"A1"};
  auto closed = positives_per_layer(a1, h, true);
  CHECK(closed[0] == std::vector<LabelId>{h.id_of("A")});
  CHECK(closed[1] == std::vector<LabelId>{h.id_of("A1")});
  auto open = positives_per_layer(a1, h, false);
  CHECK(open[0].empty());
  CHECK(open[1] == std::vector<LabelId>{h.id_of("A1")});

  const std::vector<std::string> bad{"Q"};
  CHECK_THROWS_AS(positives_per_layer(bad, h, true), Error);
}

TEST_CASE("four-level label path yields one positive per layer") {
  const std::vector<EdgeRecord> r{{"Root", "News"},
                                  {"News", "Sports"},
                                  {"Sports", "Hockey"},
                                  {"Hockey", "National Hockey League"},
                                  {"Root", "Arts"}};
  const auto h = LabelHierarchy::from_records(r);
  const std::vector<std::string> labels{"National Hockey League"};
  const auto pos = positives_per_layer(labels, h, true);
  REQUIRE(pos.size() == 4);
  for (int m = 0; m < 4; ++m) {
    REQUIRE(pos[static_cast<std::size_t>(m)].size() == 1);
    CHECK(h.node(pos[static_cast<std::size_t>(m)][0]).depth == m + 1);
  }
}

TEST_CASE("closure gives every deep positive a positive parent") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = LabelHierarchy::from_records(hpt::test::random_tree_records(12, rng));
    std::vector<std::string> names;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(h.size()) - 1);
    for (int k = 0; k < 3; ++k) names.push_back(h.node(pick(rng)).name);
    const auto pos = positives_per_layer(names, h, true);
    std::set<LabelId> all;
    for (const auto& l : pos) all.insert(l.begin(), l.end());
    for (LabelId id : all) {
      if (h.node(id).parent) CHECK(all.count(*h.node(id).parent) == 1);
    }
  }
}

}  // TEST_SUITE
