#pragma once

// Residual triplet message passing. Each edge (s, p, o) maps
// (phi_s, phi_p, phi_o) through g1 to (psi_out, phi_p', psi_in); node i
// averages psi_out over its outgoing edges and psi_in over its incoming ones,
// and adds g2 of that mean to its feature. Nodes without edges pass through.

#include <string>
#include <utility>
#include <vector>

#include "g2s/nn.hpp"

namespace g2s {

inline constexpr std::size_t kGcnWidth = 128;
inline constexpr int kGcnLayers = 5;

/// Edge endpoints as node positions plus the per-node incidence counts.
struct GraphIndex {
  std::size_t num_nodes = 0;
  std::vector<int> src, dst;
  std::vector<double> inv_degree;  // 1 / M_i, 0 for isolated nodes
  std::vector<bool> connected;

  std::size_t num_edges() const { return src.size(); }
};

GraphIndex make_graph_index(std::size_t num_nodes, const std::vector<std::pair<int, int>>& edges);

struct GraphFeatures {
  ad::Var nodes;  // N x W
  ad::Var edges;  // E x W
};

void init_gcn_layer(ad::ParameterStore& store, const std::string& name, std::size_t width, Rng& rng);
void init_gcn_stack(ad::ParameterStore& store, const std::string& name, std::size_t width, int layers, Rng& rng);

GraphFeatures gcn_layer(nn::Context& cx, const std::string& name, const GraphIndex& gi, const GraphFeatures& in);
GraphFeatures gcn_stack(nn::Context& cx, const std::string& name, int layers, const GraphIndex& gi,
                        const GraphFeatures& in);

}  // namespace g2s
