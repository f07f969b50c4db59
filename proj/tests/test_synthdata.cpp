#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "g2s/error.hpp"
#include "g2s/synthdata.hpp"
#include "helpers.hpp"

using namespace g2s;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  return out;
}

}  // namespace

TEST(Vocabulary, Synthetic) {
  const Vocabulary v = synthetic_vocabulary();
  EXPECT_EQ(v.num_objects(), 12);
  EXPECT_EQ(v.num_predicates(), 10);
  EXPECT_EQ(v.object_names[0], "floor");
  EXPECT_TRUE(v.predicate_index("standing on"));
  for (const auto& p : v.predicate_names)
    if (p != "standing on") EXPECT_TRUE(rule_for(p)) << p;
  EXPECT_EQ(synthetic_size_priors().size(), 12u);
}

TEST(SynthScene, DeterministicPerSeed) {
  const SynthConfig c;
  EXPECT_EQ(synth_scene(c, 5).graph, synth_scene(c, 5).graph);
  EXPECT_EQ(synth_scene(c, 5).scene, synth_scene(c, 5).scene);
  EXPECT_NE(synth_scene(c, 5).scene, synth_scene(c, 6).scene);
}

TEST(SynthScene, RejectsBadConfig) {
  SynthConfig c;
  c.min_objects = 5;
  c.max_objects = 4;
  EXPECT_THROW(synth_scene(c, 0), Error);
  c = SynthConfig{};
  c.room_extent = 0;
  EXPECT_THROW(synth_scene(c, 0), Error);
}

TEST(SynthScene, StructuralProperties) {
  const Vocabulary v = synthetic_vocabulary();
  const int standing = v.require_predicate("standing on");
  const int same = v.require_predicate("same as");
  SynthConfig c;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Sample s = synth_scene(c, seed);
    SCOPED_TRACE("seed " + std::to_string(seed));
    ASSERT_TRUE(validate_graph(s.graph, v).ok());
    check_alignment(s.scene, s.graph);
    const std::size_t n = s.graph.nodes.size();
    ASSERT_GE(n, 2u);
    ASSERT_LE(n, static_cast<std::size_t>(c.max_objects));
    EXPECT_EQ(s.graph.nodes[0].category_id, 0);
    for (std::size_t i = 1; i < n; ++i) {
      const auto& o = s.scene.objects[i];
      EXPECT_NE(o.category_id, 0);
      ASSERT_TRUE(o.shape_code);
      EXPECT_LT(std::fmod(o.box.alpha, 90.0), 15.0);
      EXPECT_GE(o.box.alpha, 0.0);
      EXPECT_LT(o.box.alpha, 360.0);
      EXPECT_LE(std::abs(o.box.cx), c.room_extent / 2);
      EXPECT_LE(std::abs(o.box.cy), c.room_extent / 2);
    }

    std::set<std::pair<std::size_t, std::size_t>> supported;
    std::vector<int> support_count(n, 0), degree(n, 0);
    for (const auto& [i, j] : s.graph.edge_positions()) ++degree[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < s.graph.edges.size(); ++k) {
      const auto& e = s.graph.edges[k];
      const auto i = *s.graph.index_of(e.src), j = *s.graph.index_of(e.dst);
      const auto& bi = s.scene.objects[i].box;
      const auto& bj = s.scene.objects[j].box;
      if (e.predicate_id == standing) {
        EXPECT_NEAR(bi.bottom(), bj.top(), 1e-6);
        supported.insert({std::min(i, j), std::max(i, j)});
        ++support_count[i];
      } else {
        EXPECT_TRUE(constraint_check(v.predicate_names[static_cast<std::size_t>(e.predicate_id)], bi, bj));
        EXPECT_NE(i, 0u);
        EXPECT_NE(j, 0u);
      }
      if (e.predicate_id == same) EXPECT_EQ(s.scene.objects[i].category_id, s.scene.objects[j].category_id);
    }
    for (std::size_t i = 1; i < n; ++i) {
      EXPECT_EQ(support_count[i], 1) << "object " << i;
      EXPECT_LE(degree[i], c.max_edges_per_node);
    }
    EXPECT_EQ(support_count[0], 0);
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (!supported.count({i, j}))
          EXPECT_LE(footprint_iou(s.scene.objects[i].box, s.scene.objects[j].box), 0.3 + 1e-12) << i << "," << j;
  }
}

TEST(SynthScene, GroundTruthSatisfiesEveryConstraint) {
  const Vocabulary v = synthetic_vocabulary();
  ConstraintTally tally;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const Sample s = synth_scene(SynthConfig{}, seed);
    tally.add(s.scene, s.graph, v);
  }
  const ConstraintReport r = tally.report();
  EXPECT_EQ(r.total, 1.0);
  EXPECT_GE(r.accuracy.size(), 9u);
}

TEST(SynthScene, StackingHappens) {
  const Vocabulary v = synthetic_vocabulary();
  const int standing = v.require_predicate("standing on");
  std::size_t stacked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Sample s = synth_scene(SynthConfig{}, seed);
    for (const auto& e : s.graph.edges)
      if (e.predicate_id == standing && e.dst != s.graph.nodes[0].id) ++stacked;
  }
  EXPECT_GT(stacked, 10u);
}

TEST(DerivePredicates, ExcludedNodesOnlyCarrySupport) {
  const Vocabulary v = synthetic_vocabulary();
  const Sample s = synth_scene(SynthConfig{}, 3);
  const std::size_t n = s.scene.objects.size();
  std::vector<std::optional<std::size_t>> support(n);
  for (std::size_t i = 1; i < n; ++i) support[i] = 0;
  std::vector<bool> excluded(n, false);
  excluded[0] = excluded[1] = true;
  Rng rng(1);
  const auto edges = derive_predicates(s.scene, v, 3, support, excluded, rng);
  const int standing = v.require_predicate("standing on");
  for (const auto& e : edges) {
    if (e.predicate_id == standing) continue;
    EXPECT_NE(e.src, s.scene.objects[0].id);
    EXPECT_NE(e.src, s.scene.objects[1].id);
    EXPECT_NE(e.dst, s.scene.objects[0].id);
    EXPECT_NE(e.dst, s.scene.objects[1].id);
  }
  Rng r2(1);
  EXPECT_THROW(derive_predicates(s.scene, v, 3, {}, excluded, r2), Error);
}

TEST(DerivePredicates, SameAsNeedsEqualCategories) {
  const Vocabulary v = synthetic_vocabulary();
  Scene s;
  const OrientedBox b{0.5, 0.5, 0.9, 0, 0, 0.45, 0};
  s.objects = {{0, 3, b, std::nullopt, {}}, {1, 3, b, std::nullopt, {}}, {2, 1, b, std::nullopt, {}}};
  std::vector<std::optional<std::size_t>> support(3);
  const int same = v.require_predicate("same as");
  bool saw = false;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    for (const auto& e : derive_predicates(s, v, 4, support, std::vector<bool>(3, false), rng)) {
      // Identical boxes only satisfy "same as".
      EXPECT_EQ(e.predicate_id, same);
      EXPECT_NE(e.src, 2);
      EXPECT_NE(e.dst, 2);
      saw = true;
    }
  }
  EXPECT_TRUE(saw);
}

TEST(Dataset, SplitManifestAndRoundTrip) {
  const fs::path dir = test::temp_dir("synth_ds");
  SynthConfig c;
  c.num_scenes = 100;
  c.seed = 4;
  make_dataset(c, dir);
  const Vocabulary v = load_dataset_vocabulary(dir);
  EXPECT_EQ(v, synthetic_vocabulary());
  const auto train = load_split(dir, "train", v);
  const auto val = load_split(dir, "val", v);
  EXPECT_EQ(train.size(), 90u);
  EXPECT_EQ(val.size(), 10u);
  const auto samples = make_scenes(c);
  for (std::size_t i = 0; i < 90; ++i) {
    EXPECT_EQ(train[i].graph, samples[i].graph);
    EXPECT_EQ(train[i].scene, samples[i].scene);
  }
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(val[i].scene, samples[90 + i].scene);
  const Json m = Json::parse(read_file(dir / "manifest.json"));
  EXPECT_EQ(m.at("hash").get<std::string>(), config_hash(c));
  EXPECT_EQ(m.at("train").get<int>(), 90);
  EXPECT_EQ(m.at("val").get<int>(), 10);
  EXPECT_EQ(SynthConfig::from_json(m.at("config")).to_json(), c.to_json());
  EXPECT_THROW(load_split(dir, "test", v), Error);
}

TEST(Dataset, ByteIdenticalRegeneration) {
  const fs::path a = test::temp_dir("synth_a"), b = test::temp_dir("synth_b");
  SynthConfig c;
  c.num_scenes = 20;
  c.seed = 9;
  make_dataset(c, a);
  make_dataset(c, b);
  const auto ta = read_tree(a), tb = read_tree(b);
  EXPECT_EQ(ta.size(), 2u * 20 + 2);
  EXPECT_EQ(ta, tb);
}

TEST(Dataset, HashTracksConfig) {
  SynthConfig c;
  const std::string h = config_hash(c);
  EXPECT_EQ(config_hash(SynthConfig{}), h);
  EXPECT_EQ(h.size(), 16u);
  std::set<std::string> seen{h};
  SynthConfig d = c;
  d.seed = 1;
  seen.insert(config_hash(d));
  d = c;
  d.num_scenes = 101;
  seen.insert(config_hash(d));
  d = c;
  d.max_objects = 9;
  seen.insert(config_hash(d));
  d = c;
  d.stack_probability = 0.4;
  seen.insert(config_hash(d));
  d = c;
  d.room_extent = 6;
  seen.insert(config_hash(d));
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Dataset, SplitRounding) {
  const fs::path dir = test::temp_dir("synth_small");
  SynthConfig c;
  c.num_scenes = 14;
  make_dataset(c, dir);
  const Vocabulary v = load_dataset_vocabulary(dir);
  EXPECT_EQ(load_split(dir, "train", v).size(), 13u);
  EXPECT_EQ(load_split(dir, "val", v).size(), 1u);
}
