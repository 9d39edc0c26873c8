#pragma once

#include <span>
#include <vector>

#include "hpt/autograd.hpp"
#include "hpt/hierarchy.hpp"

namespace hpt {

/// Propagation weights W^(1..K), each d x d. K defaults to one layer.
struct StructureEncoderParams {
  std::vector<const Parameter*> weights;

  int layers() const noexcept { return static_cast<int>(weights.size()); }
};

/// One round of degree-normalised aggregation with a self loop:
///   out_u = (1 / c_u) * sum_{v in N(u) u {u}} x_v,   c_u = |N(u)| + 1
Var graph_mean_aggregate(Var features, const AugmentedGraph& graph);

/// K rounds of g <- ReLU(mean_aggregate(g) W^T). `features` has one row per
/// graph node (labels first, then virtual nodes). Throws DimensionMismatch.
Var propagate(const AugmentedGraph& graph, Var features, const StructureEncoderParams& params);

/// Plain-matrix form of propagate for callers without a tape.
Matrix propagate(const AugmentedGraph& graph, const Matrix& features, std::span<const Matrix> weights);

/// Stacks label features and template features into the graph's node order.
Var node_features(Var label_features, Var template_features);

/// t'_i = t_i + g_{t_i}: residual injection of the propagated virtual-node rows.
/// Throws MissingVirtualNode when `propagated` lacks the virtual rows.
Var inject_templates(Var templates, Var propagated, const AugmentedGraph& graph);

}  // namespace hpt
