#include <gtest/gtest.h>

#include "g2s/documents.hpp"
#include "g2s/error.hpp"
#include "helpers.hpp"

using namespace g2s;
using test::random_graph;
using test::tiny_vocabulary;

namespace {

SceneGraph three_nodes() {
  SceneGraph g;
  g.vocab = "tiny";
  g.nodes = {{10, 0}, {11, 1}, {12, 2}};
  g.edges = {{10, 11, 0}, {12, 11, 2}};
  return g;
}

// Mask oracle: added nodes plus every endpoint of an added or relabeled edge.
std::vector<bool> mask_by_enumeration(const SceneGraph& g, const GraphChange& c) {
  const SceneGraph out = apply_change(g, c);
  std::vector<bool> m(out.nodes.size(), false);
  for (std::size_t i = g.nodes.size(); i < m.size(); ++i) m[i] = true;
  auto mark = [&](int id) {
    for (std::size_t i = 0; i < out.nodes.size(); ++i)
      if (out.nodes[i].id == id) m[i] = true;
  };
  for (const auto& e : c.added_edges) {
    mark(e.src);
    mark(e.dst);
  }
  for (const auto& [idx, p] : c.relabeled_edges) {
    mark(g.edges[idx].src);
    mark(g.edges[idx].dst);
  }
  return m;
}

}  // namespace

TEST(Validate, SingleNodeIsValid) {
  SceneGraph g;
  g.nodes = {{0, 0}};
  EXPECT_TRUE(validate_graph(g, tiny_vocabulary()).ok());
}

TEST(Validate, SelfLoop) {
  SceneGraph g = three_nodes();
  g.edges.push_back({10, 10, 0});
  const auto r = validate_graph(g, tiny_vocabulary());
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(r.has("self-loop"));
  EXPECT_EQ(r.violations[0].where, "edge 2");
}

TEST(Validate, PredicateAtVocabularySize) {
  SceneGraph g = three_nodes();
  g.edges[1].predicate_id = 3;
  const auto r = validate_graph(g, tiny_vocabulary());
  EXPECT_TRUE(r.has("predicate out of range"));
  EXPECT_EQ(r.violations.size(), 1u);
}

TEST(Validate, ReportsEveryViolation) {
  SceneGraph g = three_nodes();
  g.nodes.push_back({10, 5});
  g.edges.push_back({10, 99, 0});
  const auto r = validate_graph(g, tiny_vocabulary());
  EXPECT_TRUE(r.has("duplicate id"));
  EXPECT_TRUE(r.has("category out of range"));
  EXPECT_TRUE(r.has("dangling endpoint"));
}

TEST(Validate, EmptyGraph) { EXPECT_TRUE(validate_graph(SceneGraph{}, tiny_vocabulary()).has("empty graph")); }

TEST(ApplyChange, EmptyChangeIsIdentity) {
  const SceneGraph g = three_nodes();
  EXPECT_EQ(apply_change(g, GraphChange{}), g);
}

TEST(ApplyChange, AddNodeAndEdge) {
  const SceneGraph g = three_nodes();
  GraphChange c;
  c.added_nodes = {{20, 2}};
  c.added_edges = {{20, 12, 2}};
  const SceneGraph out = apply_change(g, c);
  EXPECT_EQ(out.nodes.size(), 4u);
  EXPECT_EQ(out.edges.size(), g.edges.size() + 1);
  EXPECT_EQ(out.nodes.back().id, 20);
  for (std::size_t i = 0; i < g.nodes.size(); ++i) EXPECT_EQ(out.nodes[i], g.nodes[i]);
}

TEST(ApplyChange, RelabelChangesOnlyThatPredicate) {
  const SceneGraph g = three_nodes();
  GraphChange c;
  c.relabeled_edges = {{0, 1}};
  const SceneGraph out = apply_change(g, c);
  EXPECT_EQ(out.nodes, g.nodes);
  ASSERT_EQ(out.edges.size(), g.edges.size());
  EXPECT_EQ(out.edges[0].predicate_id, 1);
  EXPECT_EQ(out.edges[0].src, g.edges[0].src);
  EXPECT_EQ(out.edges[0].dst, g.edges[0].dst);
  EXPECT_EQ(out.edges[1], g.edges[1]);
}

TEST(ApplyChange, DanglingEndpointNamed) {
  GraphChange c;
  c.added_edges = {{10, 77, 0}};
  try {
    apply_change(three_nodes(), c);
    FAIL() << "expected rejection";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("77"), std::string::npos);
  }
}

TEST(Simulate, NoneIsIdentity) {
  const SceneGraph g = three_nodes();
  auto [out, c] = simulate_manipulation(g, tiny_vocabulary(), ManipulationMode::None, 5);
  EXPECT_EQ(out, g);
  EXPECT_TRUE(c.empty());
  EXPECT_EQ(c.change_mask, std::vector<bool>(3, false));
}

TEST(Simulate, AddOnThreeNodesMatchesMaskInvariant) {
  const SceneGraph g = three_nodes();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto [out, c] = simulate_manipulation(g, tiny_vocabulary(), ManipulationMode::Add, seed);
    EXPECT_EQ(out.nodes.size(), 4u);
    EXPECT_GE(c.added_edges.size(), 1u);
    EXPECT_LE(c.added_edges.size(), 3u);
    EXPECT_EQ(c.change_mask, mask_by_enumeration(g, c));
    EXPECT_TRUE(c.change_mask[3]);
  }
}

TEST(Simulate, RelabelPicksDifferentPredicate) {
  const SceneGraph g = three_nodes();
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto [out, c] = simulate_manipulation(g, tiny_vocabulary(), ManipulationMode::Relabel, seed);
    ASSERT_EQ(c.relabeled_edges.size(), 1u);
    const auto [e, p] = c.relabeled_edges[0];
    EXPECT_NE(p, g.edges[e].predicate_id);
    EXPECT_EQ(out.edges[e].predicate_id, p);
    EXPECT_EQ(c.change_mask, mask_by_enumeration(g, c));
  }
}

TEST(Simulate, RelabelOnEdgelessGraphFails) {
  SceneGraph g;
  g.nodes = {{0, 0}};
  EXPECT_THROW(simulate_manipulation(g, tiny_vocabulary(), ManipulationMode::Relabel, 1), Error);
}

TEST(Simulate, Deterministic) {
  const SceneGraph g = three_nodes();
  for (auto mode : {ManipulationMode::Add, ManipulationMode::Relabel}) {
    auto a = simulate_manipulation(g, tiny_vocabulary(), mode, 42);
    auto b = simulate_manipulation(g, tiny_vocabulary(), mode, 42);
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second, b.second);
  }
}

TEST(Simulate, PreservesValidityProperty) {
  Rng rng(11);
  const Vocabulary v = tiny_vocabulary();
  for (int trial = 0; trial < 300; ++trial) {
    const SceneGraph g = random_graph(rng, v);
    for (auto mode : {ManipulationMode::None, ManipulationMode::Relabel, ManipulationMode::Add}) {
      if (mode == ManipulationMode::Relabel && g.edges.empty()) continue;
      auto [out, c] = simulate_manipulation(g, v, mode, rng.next_u64());
      EXPECT_TRUE(validate_graph(out, v).ok());
      EXPECT_EQ(out.nodes.size(), g.nodes.size() + c.added_nodes.size());
      EXPECT_EQ(c.change_mask, mask_by_enumeration(g, c));
    }
  }
}

TEST(DrawMode, MixtureFrequencies) {
  ManipulationMixture mix;
  int counts[3] = {0, 0, 0};
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<int>(draw_mode(mix, static_cast<std::uint64_t>(i)))];
  EXPECT_NEAR(counts[0] / double(n), 0.5, 0.01);
  EXPECT_NEAR(counts[1] / double(n), 0.25, 0.01);
  EXPECT_NEAR(counts[2] / double(n), 0.25, 0.01);
}

TEST(GraphDocument, RoundTripProperty) {
  Rng rng(3);
  const Vocabulary v = tiny_vocabulary();
  for (int trial = 0; trial < 200; ++trial) {
    const SceneGraph g = random_graph(rng, v);
    const std::string a = write_graph(g, v);
    const SceneGraph back = read_graph(a, v);
    EXPECT_EQ(back, g);
    EXPECT_EQ(write_graph(back, v), a);
  }
}

TEST(GraphDocument, MissingEdgesIsParseError) {
  try {
    read_graph(R"({"vocab": "tiny", "objects": [{"id": 0, "category": "chair"}]})", tiny_vocabulary());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("edges"), std::string::npos);
  }
}

TEST(GraphDocument, UnknownCategoryNamed) {
  try {
    read_graph(R"({"vocab": "tiny", "objects": [{"id": 0, "category": "piano"}], "edges": []})", tiny_vocabulary());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("piano"), std::string::npos);
    EXPECT_EQ(e.location(), "/objects/0/category");
  }
}

TEST(GraphDocument, MalformedJsonHasLocation) {
  try {
    read_graph("{\"objects\": [", tiny_vocabulary());
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(e.location().find("byte"), std::string::npos);
  }
}

TEST(GraphDocument, PredicateNameResolvesByPosition) {
  const Vocabulary v = read_vocabulary(R"({"objects": ["a", "b"], "predicates": ["left of", "right of"]})", "v");
  const SceneGraph g = read_graph(R"({"vocab": "v", "objects": [{"id": 0, "category": "a"}, {"id": 1, "category": "b"}],
                                      "edges": [{"src": 0, "dst": 1, "predicate": "left of"}]})",
                                  v);
  ASSERT_EQ(g.edges.size(), 1u);
  EXPECT_EQ(g.edges[0].predicate_id, 0);
  EXPECT_EQ(g.nodes[1].category_id, 1);
}

TEST(VocabularyDocument, RoundTripAndDuplicates) {
  const Vocabulary v = tiny_vocabulary();
  EXPECT_EQ(read_vocabulary(write_vocabulary(v), "tiny"), v);
  EXPECT_THROW(read_vocabulary(R"({"objects": ["a", "a"], "predicates": []})"), ParseError);
}

TEST(ChangeDocument, RoundTripDerivesMask) {
  const SceneGraph g = three_nodes();
  const Vocabulary v = tiny_vocabulary();
  GraphChange c;
  c.added_nodes = {{20, 1}};
  c.added_edges = {{20, 10, 0}};
  c.relabeled_edges = {{1, 0}};
  c.change_mask = compute_change_mask(g, c);
  const GraphChange back = read_change(write_change(c, v), g, v);
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.change_mask, (std::vector<bool>{true, true, true, true}));
}
