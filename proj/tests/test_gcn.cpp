#include <gtest/gtest.h>

#include <cmath>

#include "g2s/error.hpp"
#include "g2s/gcn.hpp"
#include "g2s/rng.hpp"

using namespace g2s;
using ad::Var;

namespace {

constexpr std::size_t W = 6;

struct Fixture {
  std::size_t n;
  std::vector<std::pair<int, int>> edges;
  std::vector<double> nodes, efeat;
};

Fixture random_fixture(Rng& rng, std::size_t n, std::size_t e, bool isolate_last = false) {
  Fixture f{n, {}, rng.normals(n * W), rng.normals(e * W)};
  const std::size_t span = isolate_last ? n - 1 : n;
  for (std::size_t k = 0; k < e; ++k) {
    const int a = static_cast<int>(rng.below(span));
    int b = static_cast<int>(rng.below(span - 1));
    if (b >= a) ++b;
    f.edges.emplace_back(a, b);
  }
  return f;
}

GraphFeatures run_layer(ad::ParameterStore& store, const Fixture& f, ad::Tape& t) {
  nn::Context cx(t, store, false, false);
  const GraphIndex gi = make_graph_index(f.n, f.edges);
  return gcn_layer(cx, "l", gi, {t.constant({f.n, W}, f.nodes), t.constant({f.edges.size(), W}, f.efeat)});
}

// Plain-loop evaluation of one layer from the stored weights.
std::vector<double> mlp2_ref(const ad::ParameterStore& s, const std::string& name, const std::vector<double>& x) {
  auto lin = [&](const std::string& n, const std::vector<double>& in) {
    const auto& w = s.get(n + "/W");
    const auto& b = s.get(n + "/b");
    std::vector<double> out(w.shape.cols);
    for (std::size_t c = 0; c < out.size(); ++c) {
      double acc = b.value[c];
      for (std::size_t r = 0; r < in.size(); ++r) acc += in[r] * w.value[r * w.shape.cols + c];
      out[c] = acc;
    }
    return out;
  };
  auto h = lin(name + "/0", x);
  for (double& v : h) v = v > 0 ? v : 0.2 * v;
  return lin(name + "/1", h);
}

std::pair<std::vector<double>, std::vector<double>> layer_ref(const ad::ParameterStore& s, const Fixture& f) {
  std::vector<double> rho(f.n * W, 0.0), nodes = f.nodes, edges;
  std::vector<int> deg(f.n, 0);
  for (std::size_t e = 0; e < f.edges.size(); ++e) {
    const auto [a, b] = f.edges[e];
    std::vector<double> x(f.nodes.begin() + a * W, f.nodes.begin() + (a + 1) * W);
    x.insert(x.end(), f.efeat.begin() + e * W, f.efeat.begin() + (e + 1) * W);
    x.insert(x.end(), f.nodes.begin() + b * W, f.nodes.begin() + (b + 1) * W);
    const auto y = mlp2_ref(s, "l/g1", x);
    for (std::size_t c = 0; c < W; ++c) {
      rho[a * W + c] += y[c];
      rho[b * W + c] += y[2 * W + c];
    }
    edges.insert(edges.end(), y.begin() + W, y.begin() + 2 * W);
    ++deg[static_cast<std::size_t>(a)];
    ++deg[static_cast<std::size_t>(b)];
  }
  for (std::size_t i = 0; i < f.n; ++i) {
    if (deg[i] == 0) continue;
    std::vector<double> r(rho.begin() + i * W, rho.begin() + (i + 1) * W);
    for (double& v : r) v /= deg[i];
    const auto u = mlp2_ref(s, "l/g2", r);
    for (std::size_t c = 0; c < W; ++c) nodes[i * W + c] += u[c];
  }
  return {nodes, edges};
}

ad::ParameterStore layer_store(std::uint64_t seed) {
  ad::ParameterStore s;
  Rng rng(seed);
  init_gcn_layer(s, "l", W, rng);
  return s;
}

}  // namespace

TEST(GraphIndex, Degrees) {
  const GraphIndex gi = make_graph_index(4, {{0, 1}, {0, 2}, {2, 0}});
  EXPECT_DOUBLE_EQ(gi.inv_degree[0], 1.0 / 3);
  EXPECT_DOUBLE_EQ(gi.inv_degree[1], 1.0);
  EXPECT_DOUBLE_EQ(gi.inv_degree[3], 0.0);
  EXPECT_FALSE(gi.connected[3]);
  EXPECT_THROW(make_graph_index(2, {{0, 2}}), Error);
}

TEST(GcnLayer, MatchesLoopReference) {
  Rng rng(1);
  auto store = layer_store(2);
  for (int trial = 0; trial < 10; ++trial) {
    const Fixture f = random_fixture(rng, 5, 7, true);
    ad::Tape t;
    const auto out = run_layer(store, f, t);
    const auto [nodes, edges] = layer_ref(store, f);
    for (std::size_t k = 0; k < nodes.size(); ++k) EXPECT_NEAR(out.nodes.values()[k], nodes[k], 1e-12);
    for (std::size_t k = 0; k < edges.size(); ++k) EXPECT_NEAR(out.edges.values()[k], edges[k], 1e-12);
  }
}

TEST(GcnLayer, IsolatedNodeBitIdentical) {
  Rng rng(3);
  auto store = layer_store(4);
  const Fixture f = random_fixture(rng, 4, 5, true);
  ad::Tape t;
  const auto out = run_layer(store, f, t);
  for (std::size_t c = 0; c < W; ++c) EXPECT_EQ(out.nodes.at(3, c), f.nodes[3 * W + c]);
}

TEST(GcnLayer, ZeroG2LeavesNodesButUpdatesEdges) {
  Rng rng(5);
  auto store = layer_store(6);
  for (const char* p : {"l/g2/1/W", "l/g2/1/b"})
    for (double& v : store.get(p).value) v = 0;
  const Fixture f = random_fixture(rng, 4, 4);
  ad::Tape t;
  const auto out = run_layer(store, f, t);
  for (std::size_t k = 0; k < f.nodes.size(); ++k) EXPECT_EQ(out.nodes.values()[k], f.nodes[k]);
  double diff = 0;
  for (std::size_t k = 0; k < f.efeat.size(); ++k) diff += std::abs(out.edges.values()[k] - f.efeat[k]);
  EXPECT_GT(diff, 1e-3);
}

TEST(GcnLayer, PermutationEquivariant) {
  Rng rng(7);
  auto store = layer_store(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Fixture f = random_fixture(rng, 6, 9);
    std::vector<int> perm(f.n);  // new position of old node i
    for (std::size_t i = 0; i < f.n; ++i) perm[i] = static_cast<int>(i);
    rng.shuffle(perm);
    Fixture g = f;
    for (std::size_t i = 0; i < f.n; ++i)
      std::copy_n(f.nodes.begin() + i * W, W, g.nodes.begin() + perm[i] * W);
    for (auto& [a, b] : g.edges) a = perm[a], b = perm[b];
    ad::Tape t1, t2;
    const auto o1 = run_layer(store, f, t1);
    const auto o2 = run_layer(store, g, t2);
    for (std::size_t i = 0; i < f.n; ++i)
      for (std::size_t c = 0; c < W; ++c) EXPECT_NEAR(o1.nodes.at(i, c), o2.nodes.at(perm[i], c), 1e-12);
  }
}

TEST(GcnLayer, DuplicatedEdgesLeaveNodesUnchanged) {
  Rng rng(9);
  auto store = layer_store(10);
  const Fixture f = random_fixture(rng, 5, 6);
  Fixture g = f;
  for (int k = 0; k < 2; ++k) {
    g.edges.insert(g.edges.end(), f.edges.begin(), f.edges.end());
    g.efeat.insert(g.efeat.end(), f.efeat.begin(), f.efeat.end());
  }
  ad::Tape t1, t2;
  const auto o1 = run_layer(store, f, t1), o2 = run_layer(store, g, t2);
  for (std::size_t k = 0; k < f.nodes.size(); ++k) EXPECT_NEAR(o1.nodes.values()[k], o2.nodes.values()[k], 1e-12);
}

TEST(GcnLayer, EdgeOrderIrrelevant) {
  Rng rng(11);
  auto store = layer_store(12);
  const Fixture f = random_fixture(rng, 5, 8);
  Fixture g = f;
  std::vector<std::size_t> order(f.edges.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  rng.shuffle(order);
  for (std::size_t k = 0; k < order.size(); ++k) {
    g.edges[k] = f.edges[order[k]];
    std::copy_n(f.efeat.begin() + order[k] * W, W, g.efeat.begin() + k * W);
  }
  ad::Tape t1, t2;
  const auto o1 = run_layer(store, f, t1), o2 = run_layer(store, g, t2);
  for (std::size_t k = 0; k < f.nodes.size(); ++k) EXPECT_NEAR(o1.nodes.values()[k], o2.nodes.values()[k], 1e-12);
}

TEST(GcnLayer, WidthMismatch) {
  auto store = layer_store(13);
  ad::Tape t;
  nn::Context cx(t, store, false, false);
  const GraphIndex gi = make_graph_index(2, {{0, 1}});
  EXPECT_THROW(gcn_layer(cx, "l", gi, {t.constant({2, W}, 0.0), t.constant({1, W + 1}, 0.0)}), ShapeError);
  EXPECT_THROW(gcn_layer(cx, "l", gi, {t.constant({2, W + 2}, 0.0), t.constant({1, W + 2}, 0.0)}), ShapeError);
}

TEST(GcnStack, ZeroNetworkIsIdentityOnNodes) {
  ad::ParameterStore s;
  Rng rng(14);
  init_gcn_stack(s, "s", W, kGcnLayers, rng);
  for (auto& [name, p] : s.params())
    for (double& v : p.value) v = 0;
  const Fixture f = random_fixture(rng, 4, 5);
  ad::Tape t;
  nn::Context cx(t, s, false, false);
  const auto out = gcn_stack(cx, "s", kGcnLayers, make_graph_index(f.n, f.edges),
                             {t.constant({f.n, W}, f.nodes), t.constant({f.edges.size(), W}, f.efeat)});
  for (std::size_t k = 0; k < f.nodes.size(); ++k) EXPECT_EQ(out.nodes.values()[k], f.nodes[k]);
}

TEST(GcnStack, SingleNodeUnchanged) {
  ad::ParameterStore s;
  Rng rng(15);
  init_gcn_stack(s, "s", W, kGcnLayers, rng);
  const auto x = rng.normals(W);
  ad::Tape t;
  nn::Context cx(t, s, false, false);
  const auto out = gcn_stack(cx, "s", kGcnLayers, make_graph_index(1, {}), {t.constant({1, W}, x), t.constant({0, W}, 0.0)});
  for (std::size_t c = 0; c < W; ++c) EXPECT_EQ(out.nodes.at(0, c), x[c]);
}

TEST(GcnStack, GradientMatchesFiniteDifferences) {
  ad::ParameterStore s;
  Rng rng(16);
  init_gcn_stack(s, "s", W, kGcnLayers, rng);
  const Fixture f = random_fixture(rng, 4, 5, true);
  const GraphIndex gi = make_graph_index(f.n, f.edges);
  const auto target = rng.normals(f.n * W);
  auto loss = [&](ad::Tape& t, Var x) {
    nn::Context cx(t, s, true, true);
    const auto out = gcn_stack(cx, "s", kGcnLayers, gi, {x, t.constant({f.edges.size(), W}, f.efeat)});
    return ad::sum(ad::mul(out.nodes, t.constant({f.n, W}, target)));
  };
  EXPECT_LT(ad::grad_check(loss, {f.n, W}, f.nodes), 1e-5);
  ad::ParamCheckOptions opt;
  opt.max_entries_per_param = 4;
  const auto r = ad::grad_check_params([&](ad::Tape& t) { return loss(t, t.constant({f.n, W}, f.nodes)); }, s, opt);
  EXPECT_LT(r.max_error, 1e-5) << r.worst_param;
}
