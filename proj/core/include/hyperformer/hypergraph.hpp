#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hyperformer/dataset.hpp"

namespace hyperformer {

/// In-batch feature hypergraph: nodes are the batch's instances, hyperedges are
/// the distinct feature ids that occur in the batch.
struct FeatureHypergraph {
  std::size_t node_count = 0;
  /// Local edge index -> global feature id, in first-occurrence order.
  std::vector<FeatureId> edge_ids;
  /// E_i: local edge indices of node i, deduplicated, in slot order.
  std::vector<std::vector<std::size_t>> node_edges;
  /// V_j: node indices of edge j, ascending.
  std::vector<std::vector<std::size_t>> edge_nodes;

  std::size_t edge_count() const noexcept { return edge_ids.size(); }
  std::optional<std::size_t> local_edge(FeatureId id) const;

 private:
  friend FeatureHypergraph build_batch_hypergraph(std::span<const SparseInstance> batch);
  std::unordered_map<FeatureId, std::size_t> index_;
};

/// Throws PreconditionError on an empty batch or an instance with no features.
FeatureHypergraph build_batch_hypergraph(std::span<const SparseInstance> batch);

using IncidencePairs = std::set<std::pair<std::size_t, FeatureId>>;

/// Exhaustive (node, feature id) membership pairs by direct enumeration.
IncidencePairs incidence_oracle(std::span<const SparseInstance> batch);

/// Membership pairs reconstructed from a hypergraph's node incidence lists.
IncidencePairs incidence_pairs(const FeatureHypergraph& graph);

}  // namespace hyperformer
