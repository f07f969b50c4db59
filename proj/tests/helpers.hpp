#pragma once

#include <filesystem>
#include <string>

#include "g2s/model.hpp"
#include "g2s/rng.hpp"
#include "g2s/scenegraph.hpp"
#include "g2s/synthdata.hpp"

namespace g2s::test {

inline Vocabulary tiny_vocabulary() {
  return Vocabulary{"tiny", {"chair", "table", "lamp"}, {"left of", "right of", "standing on"}};
}

/// Random valid graph: unique shuffled ids, no self-loops, parallel edges allowed.
inline SceneGraph random_graph(Rng& rng, const Vocabulary& v, int max_nodes = 6, int max_edges = 8) {
  SceneGraph g;
  g.vocab = v.name;
  const int n = rng.uniform_int(1, max_nodes);
  std::vector<int> ids;
  for (int i = 0; i < n; ++i) ids.push_back(3 * i + rng.uniform_int(0, 2));
  rng.shuffle(ids);
  for (int id : ids) g.nodes.push_back({id, static_cast<int>(rng.below(static_cast<std::uint64_t>(v.num_objects())))});
  if (n >= 2) {
    const int e = rng.uniform_int(0, max_edges);
    for (int k = 0; k < e; ++k) {
      const std::size_t a = rng.below(static_cast<std::uint64_t>(n));
      std::size_t b = rng.below(static_cast<std::uint64_t>(n - 1));
      if (b >= a) ++b;
      g.edges.push_back({g.nodes[a].id, g.nodes[b].id, static_cast<int>(rng.below(static_cast<std::uint64_t>(v.num_predicates())))});
    }
  }
  return g;
}

/// Small network with the production topology, for fast tests.
inline ModelConfig small_config(const Vocabulary& v) {
  ModelConfig c;
  c.num_categories = v.num_objects();
  c.num_predicates = v.num_predicates();
  c.width = 16;
  c.z_dim = 8;
  c.layers = 2;
  c.disc_width = 24;
  return c;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("g2s_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace g2s::test
