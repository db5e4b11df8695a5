#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hyperformer/attention.hpp"
#include "hyperformer/dataset.hpp"
#include "hyperformer/gradient_store.hpp"
#include "hyperformer/heads.hpp"
#include "hyperformer/hypergraph.hpp"
#include "hyperformer/matrix.hpp"

namespace hyperformer {

inline constexpr const char* kEmbeddingParam = "embedding";

struct ModelConfig {
  std::size_t d = 16;       ///< embedding width
  std::size_t layers = 2;   ///< stacked hypergraph attention layers (L)
  std::size_t fields = 1;   ///< field count (m)
  bool scale_scores = false;  ///< divide attention logits by sqrt(d)
  bool use_ffn = false;       ///< feed-forward after each aggregation
  /// When false, message passing is skipped and instance embeddings are the
  /// raw per-slot table rows (the ablation baseline).
  bool message_passing = true;
  HeadKind head = HeadKind::logistic;
  std::size_t hidden = 32;      ///< mlp and tower hidden width
  std::size_t tower_width = 16; ///< two-tower output width
  std::size_t user_fields = 0;  ///< two-tower: leading fields feeding the user tower

  /// Throws PreconditionError naming the offending field.
  void validate() const;
  double score_scale() const;
  std::size_t embedding_width() const noexcept { return fields * d; }
};

/// Projections for one layer: edge-to-node then node-to-edge attention.
struct LayerParams {
  AttentionParams edge_to_node;  ///< query (in_node x d), key/value (d x d)
  AttentionParams node_to_edge;  ///< all d x d
};

enum class ParamInit { xavier, zero };

struct ParamRef {
  std::string name;
  Matrix* value;
  ParamInit init;
};

struct ConstParamRef {
  std::string name;
  const Matrix* value;
};

struct ModelState {
  ModelConfig config;
  Matrix embedding;  ///< N x d
  std::vector<LayerParams> layers;
  Head head;

  std::size_t vocabulary_size() const noexcept { return embedding.rows(); }

  /// Every trainable matrix in checkpoint order: embedding, per layer the
  /// edge-side then node-side projections (query, key, value, then FFN), head.
  std::vector<ParamRef> parameters();
  std::vector<ConstParamRef> parameters() const;

  /// Allocates zero-valued parameters with the shapes implied by `config`.
  static ModelState allocate(const ModelConfig& config, std::size_t vocabulary_size);
};

/// Xavier-uniform weights (embedding fan is N x d), zero biases, drawn in
/// parameter order from one stream seeded by `seed`.
ModelState init_model(const ModelConfig& config, std::size_t vocabulary_size, std::uint64_t seed);

/// Per-layer intermediates.
struct LayerTrace {
  AttentionCache edge_to_node;
  AttentionCache node_to_edge;
};

struct ForwardTrace {
  FeatureHypergraph graph;
  /// H^0 (n x m*d), H^1..H^L (n x d)
  std::vector<Matrix> node_states;
  /// F^0..F^L (edges x d)
  std::vector<Matrix> edge_states;
  std::vector<LayerTrace> layers;
  /// slot_edges[i][s]: local edge indices of instance i's slot s.
  std::vector<std::vector<std::vector<std::size_t>>> slot_edges;

  const Matrix& final_edges() const { return edge_states.back(); }
  /// alpha(l)[i][k]: weight of node i on edge node_edges[i][k] in layer l (1-based).
  const std::vector<std::vector<double>>& alpha(std::size_t layer) const;
  /// beta(l)[j][k]: weight of edge j on node edge_nodes[j][k] in layer l (1-based).
  const std::vector<std::vector<double>>& beta(std::size_t layer) const;
};

/// H^0: per instance, the mean table row of each slot, concatenated over slots.
Matrix init_node_representations(std::span<const SparseInstance> batch,
                                 const FeatureHypergraph& graph, const Matrix& embedding,
                                 std::size_t fields);

struct AttentionResult {
  Matrix output;
  std::vector<std::vector<double>> weights;
};

/// H^l from H^{l-1} (queries) and F^{l-1} (keys and values) over E_i.
AttentionResult edge_to_node_attention(std::size_t layer, const Matrix& prev_nodes,
                                       const Matrix& prev_edges, const FeatureHypergraph& graph,
                                       const LayerParams& params, const ModelConfig& config);

/// F^l from F^{l-1} (queries) and H^l (keys and values) over V_j.
AttentionResult node_to_edge_attention(std::size_t layer, const Matrix& prev_edges,
                                       const Matrix& nodes, const FeatureHypergraph& graph,
                                       const LayerParams& params, const ModelConfig& config);

ForwardTrace hyperformer_forward(std::span<const SparseInstance> batch, const ModelState& state);

/// Per slot, the mean of the slot's final edge rows, concatenated. Throws
/// PreconditionError if a feature of `instance` is not in the traced batch.
std::vector<double> instance_embedding(const SparseInstance& instance, const ForwardTrace& trace);

/// instance_embedding for every traced instance (n x m*d). Without message
/// passing this is H^0.
Matrix instance_embeddings(const ForwardTrace& trace, const ModelConfig& config);

/// Forward pass through the embedding stack and the head.
struct BatchForward {
  ForwardTrace trace;
  HeadCache head;
  const std::vector<double>& logits() const noexcept { return head.logits; }
};

BatchForward forward_batch(std::span<const SparseInstance> batch, const ModelState& state);

/// Gradients of all parameters given dLoss/dLogits. Embedding gradients are
/// stored row-sparse and only for in-batch features.
GradientStore backward(const BatchForward& forward, const ModelState& state,
                       std::span<const double> d_logits);

}  // namespace hyperformer
