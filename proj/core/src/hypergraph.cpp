#include "hyperformer/hypergraph.hpp"

#include <algorithm>

#include "hyperformer/errors.hpp"

namespace hyperformer {

std::optional<std::size_t> FeatureHypergraph::local_edge(FeatureId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FeatureHypergraph build_batch_hypergraph(std::span<const SparseInstance> batch) {
  if (batch.empty()) throw PreconditionError("build_batch_hypergraph: empty batch");
  FeatureHypergraph g;
  g.node_count = batch.size();
  g.node_edges.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto& incident = g.node_edges[i];
    for (const auto& slot : batch[i].slots) {
      for (FeatureId id : slot) {
        auto [it, inserted] = g.index_.try_emplace(id, g.edge_ids.size());
        if (inserted) {
          g.edge_ids.push_back(id);
          g.edge_nodes.emplace_back();
        }
        const std::size_t edge = it->second;
        if (std::find(incident.begin(), incident.end(), edge) != incident.end()) continue;
        incident.push_back(edge);
        // Nodes are visited in ascending order, so V_j stays sorted.
        g.edge_nodes[edge].push_back(i);
      }
    }
    if (incident.empty()) {
      throw PreconditionError("build_batch_hypergraph: instance " + std::to_string(i) +
                              " has no features");
    }
  }
  return g;
}

IncidencePairs incidence_oracle(std::span<const SparseInstance> batch) {
  IncidencePairs pairs;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (const auto& slot : batch[i].slots) {
      for (FeatureId id : slot) pairs.emplace(i, id);
    }
  }
  return pairs;
}

IncidencePairs incidence_pairs(const FeatureHypergraph& graph) {
  IncidencePairs pairs;
  for (std::size_t i = 0; i < graph.node_edges.size(); ++i) {
    for (std::size_t e : graph.node_edges[i]) pairs.emplace(i, graph.edge_ids[e]);
  }
  return pairs;
}

}  // namespace hyperformer
