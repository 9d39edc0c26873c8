#include "hpt/structure.hpp"

#include <array>
#include <string>

#include "hpt/error.hpp"

namespace hpt {

Var graph_mean_aggregate(Var features, const AugmentedGraph& graph) {
  const Matrix& x = features.value();
  if (static_cast<std::size_t>(x.rows()) != graph.node_count()) {
    throw Error(ErrorKind::kDimensionMismatch, std::to_string(x.rows()) + " feature rows for " +
                                                   std::to_string(graph.node_count()) + " graph nodes");
  }
  Matrix out(x.rows(), x.cols());
  for (std::size_t u = 0; u < graph.node_count(); ++u) {
    const auto& nb = graph.adjacency[u];
    const auto ui = static_cast<Eigen::Index>(u);
    out.row(ui) = x.row(ui);
    for (int v : nb) out.row(ui) += x.row(v);
    out.row(ui) /= static_cast<double>(nb.size() + 1);
  }
  const int ix = features.id();
  return features.tape()->push(std::move(out), {ix}, [ix, &graph](Tape& tp, int self) {
    const Matrix& g = tp.grad(self);
    Matrix& gx = tp.grad_slot(ix);
    for (std::size_t u = 0; u < graph.node_count(); ++u) {
      const auto& nb = graph.adjacency[u];
      const auto ui = static_cast<Eigen::Index>(u);
      const RowVector share = g.row(ui) / static_cast<double>(nb.size() + 1);
      gx.row(ui) += share;
      for (int v : nb) gx.row(v) += share;
    }
  });
}

Var propagate(const AugmentedGraph& graph, Var features, const StructureEncoderParams& params) {
  if (params.weights.empty()) throw Error(ErrorKind::kInvalidConfig, "structure encoder needs K >= 1 layers");
  Tape& tape = *features.tape();
  Var g = features;
  for (const Parameter* w : params.weights) {
    if (w->value.rows() != g.cols() || w->value.cols() != g.cols()) {
      throw Error(ErrorKind::kDimensionMismatch, "propagation weight must be d x d with d = " + std::to_string(g.cols()));
    }
    g = ops::relu(ops::matmul_nt(graph_mean_aggregate(g, graph), tape.param(*w)));
  }
  return g;
}

Matrix propagate(const AugmentedGraph& graph, const Matrix& features, std::span<const Matrix> weights) {
  std::vector<Parameter> store(weights.size());
  StructureEncoderParams params;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    store[k].value = weights[k];
    store[k].index = k;
  }
  for (const auto& p : store) params.weights.push_back(&p);
  Tape tape;
  return propagate(graph, tape.constant(features), params).value();
}

Var node_features(Var label_features, Var template_features) {
  const std::array<Var, 2> parts{label_features, template_features};
  return ops::concat_rows(parts);
}

Var inject_templates(Var templates, Var propagated, const AugmentedGraph& graph) {
  const auto layers = static_cast<Eigen::Index>(graph.num_layers);
  const auto first_virtual = static_cast<Eigen::Index>(graph.num_labels);
  if (propagated.rows() < first_virtual + layers) {
    throw Error(ErrorKind::kMissingVirtualNode, "propagated features hold " + std::to_string(propagated.rows()) +
                                                    " rows, need " + std::to_string(first_virtual + layers));
  }
  if (templates.rows() != layers) {
    throw Error(ErrorKind::kMissingVirtualNode, std::to_string(templates.rows()) + " templates for " +
                                                    std::to_string(layers) + " virtual nodes");
  }
  return ops::add(templates, ops::slice_rows(propagated, first_virtual, layers));
}

}  // namespace hpt
