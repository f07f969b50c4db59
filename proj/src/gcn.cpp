#include "g2s/gcn.hpp"

#include "g2s/error.hpp"

namespace g2s {

GraphIndex make_graph_index(std::size_t num_nodes, const std::vector<std::pair<int, int>>& edges) {
  GraphIndex gi;
  gi.num_nodes = num_nodes;
  std::vector<int> degree(num_nodes, 0);
  for (const auto& [s, d] : edges) {
    if (s < 0 || d < 0 || static_cast<std::size_t>(s) >= num_nodes || static_cast<std::size_t>(d) >= num_nodes)
      throw Error("graph index: edge (" + std::to_string(s) + ", " + std::to_string(d) + ") outside " +
                  std::to_string(num_nodes) + " nodes");
    gi.src.push_back(s);
    gi.dst.push_back(d);
    ++degree[static_cast<std::size_t>(s)];
    ++degree[static_cast<std::size_t>(d)];
  }
  gi.inv_degree.resize(num_nodes);
  gi.connected.resize(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    gi.connected[i] = degree[i] > 0;
    gi.inv_degree[i] = degree[i] > 0 ? 1.0 / degree[i] : 0.0;
  }
  return gi;
}

void init_gcn_layer(ad::ParameterStore& store, const std::string& name, std::size_t width, Rng& rng) {
  nn::init_mlp2(store, name + "/g1", 3 * width, width, 3 * width, rng);
  nn::init_mlp2(store, name + "/g2", width, width, width, rng, 0.5);
}

void init_gcn_stack(ad::ParameterStore& store, const std::string& name, std::size_t width, int layers, Rng& rng) {
  for (int l = 0; l < layers; ++l) init_gcn_layer(store, name + "/" + std::to_string(l), width, rng);
}

GraphFeatures gcn_layer(nn::Context& cx, const std::string& name, const GraphIndex& gi, const GraphFeatures& in) {
  const std::size_t w = in.nodes.cols();
  if (in.nodes.rows() != gi.num_nodes)
    throw ShapeError("gcn_layer: " + std::to_string(in.nodes.rows()) + " node rows for " + std::to_string(gi.num_nodes) +
                     " nodes");
  if (in.edges.rows() != gi.num_edges() || in.edges.cols() != w)
    throw ShapeError("gcn_layer: edge features " + ad::to_string(in.edges.shape()) + " do not match " +
                     std::to_string(gi.num_edges()) + " edges of width " + std::to_string(w));
  if (gi.num_edges() == 0) return in;

  ad::Var trip = ad::concat({ad::embedding_lookup(in.nodes, gi.src), in.edges, ad::embedding_lookup(in.nodes, gi.dst)}, 1);
  ad::Var out = nn::mlp2(cx, name + "/g1", trip);
  if (out.cols() != 3 * w) throw ShapeError("gcn_layer: g1 output width " + std::to_string(out.cols()) + " is not 3 x " + std::to_string(w));
  ad::Var psi_out = ad::slice(out, 1, 0, w);
  ad::Var edges = ad::slice(out, 1, w, 2 * w);
  ad::Var psi_in = ad::slice(out, 1, 2 * w, 3 * w);

  ad::Var pooled = ad::add(ad::scatter_add_rows(psi_out, gi.src, gi.num_nodes), ad::scatter_add_rows(psi_in, gi.dst, gi.num_nodes));
  ad::Var rho = ad::row_scale(pooled, gi.inv_degree);
  ad::Var nodes = ad::residual_update(in.nodes, nn::mlp2(cx, name + "/g2", rho), gi.connected);
  return {nodes, edges};
}

GraphFeatures gcn_stack(nn::Context& cx, const std::string& name, int layers, const GraphIndex& gi,
                        const GraphFeatures& in) {
  GraphFeatures f = in;
  for (int l = 0; l < layers; ++l) f = gcn_layer(cx, name + "/" + std::to_string(l), gi, f);
  return f;
}

}  // namespace g2s
