#include "hyperformer/model.hpp"

#include <cmath>

#include "hyperformer/errors.hpp"
#include "hyperformer/rng.hpp"

namespace hyperformer {

void ModelConfig::validate() const {
  if (d == 0) throw PreconditionError("model config: d must be >= 1");
  if (layers == 0) throw PreconditionError("model config: layers must be >= 1");
  if (fields == 0) throw PreconditionError("model config: fields must be >= 1");
  if ((head == HeadKind::mlp || head == HeadKind::two_tower) && hidden == 0) {
    throw PreconditionError("model config: hidden must be >= 1");
  }
  if (head == HeadKind::two_tower) {
    if (user_fields == 0 || user_fields >= fields) {
      throw PreconditionError("model config: user_fields must lie in [1, fields)");
    }
    if (tower_width == 0) throw PreconditionError("model config: tower_width must be >= 1");
  }
}

double ModelConfig::score_scale() const {
  return scale_scores ? 1.0 / std::sqrt(static_cast<double>(d)) : 1.0;
}

namespace {

void append_attention(std::vector<ParamRef>& out, const std::string& prefix, AttentionParams& p) {
  out.push_back({prefix + ".query", &p.query, ParamInit::xavier});
  out.push_back({prefix + ".key", &p.key, ParamInit::xavier});
  out.push_back({prefix + ".value", &p.value, ParamInit::xavier});
  if (p.ffn) {
    out.push_back({prefix + ".ffn_w1", &p.ffn->w1, ParamInit::xavier});
    out.push_back({prefix + ".ffn_b1", &p.ffn->b1, ParamInit::zero});
    out.push_back({prefix + ".ffn_w2", &p.ffn->w2, ParamInit::xavier});
    out.push_back({prefix + ".ffn_b2", &p.ffn->b2, ParamInit::zero});
  }
}

std::string layer_prefix(std::size_t layer_index) {
  return "layer" + std::to_string(layer_index + 1);
}

AttentionParams make_attention(std::size_t query_width, std::size_t d, bool ffn) {
  AttentionParams p{Matrix(query_width, d), Matrix(d, d), Matrix(d, d), std::nullopt};
  if (ffn) p.ffn = FeedForwardParams{Matrix(d, d), Matrix(1, d), Matrix(d, d), Matrix(1, d)};
  return p;
}

}  // namespace

std::vector<ParamRef> ModelState::parameters() {
  std::vector<ParamRef> out;
  out.push_back({kEmbeddingParam, &embedding, ParamInit::xavier});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    append_attention(out, layer_prefix(l) + ".edge", layers[l].edge_to_node);
    append_attention(out, layer_prefix(l) + ".node", layers[l].node_to_edge);
  }
  const auto names = Head::param_names(head.kind);
  for (std::size_t k = 0; k < head.params.size(); ++k) {
    // Biases are named b, bN or <tower>_b[N].
    const auto suffix = names[k].substr(names[k].rfind('_') + 1);
    const bool bias = suffix.front() == 'b';
    out.push_back({"head." + names[k], &head.params[k], bias ? ParamInit::zero : ParamInit::xavier});
  }
  return out;
}

std::vector<ConstParamRef> ModelState::parameters() const {
  auto refs = const_cast<ModelState*>(this)->parameters();
  std::vector<ConstParamRef> out;
  out.reserve(refs.size());
  for (auto& r : refs) out.push_back({std::move(r.name), r.value});
  return out;
}

ModelState ModelState::allocate(const ModelConfig& config, std::size_t vocabulary_size) {
  config.validate();
  if (vocabulary_size == 0) throw PreconditionError("vocabulary size must be >= 1");
  ModelState s;
  s.config = config;
  s.embedding = Matrix(vocabulary_size, config.d);
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t in_node = l == 0 ? config.embedding_width() : config.d;
    s.layers.push_back({make_attention(in_node, config.d, config.use_ffn),
                        make_attention(config.d, config.d, config.use_ffn)});
  }
  s.head = Head::create(config.head, config.embedding_width(), config.hidden, config.tower_width,
                        config.user_fields * config.d);
  return s;
}

ModelState init_model(const ModelConfig& config, std::size_t vocabulary_size, std::uint64_t seed) {
  ModelState s = ModelState::allocate(config, vocabulary_size);
  Rng rng(seed);
  for (auto& p : s.parameters()) {
    if (p.init == ParamInit::xavier) xavier_fill(*p.value, rng);
  }
  return s;
}

const std::vector<std::vector<double>>& ForwardTrace::alpha(std::size_t layer) const {
  if (layer == 0 || layer > layers.size()) throw PreconditionError("alpha: layer out of range");
  return layers[layer - 1].edge_to_node.weights;
}

const std::vector<std::vector<double>>& ForwardTrace::beta(std::size_t layer) const {
  if (layer == 0 || layer > layers.size()) throw PreconditionError("beta: layer out of range");
  return layers[layer - 1].node_to_edge.weights;
}

Matrix init_node_representations(std::span<const SparseInstance> batch,
                                 const FeatureHypergraph& graph, const Matrix& embedding,
                                 std::size_t fields) {
  if (batch.size() != graph.node_count) {
    throw DimensionError("init_node_representations: batch of " + std::to_string(batch.size()) +
                         " for a graph with " + std::to_string(graph.node_count) + " nodes");
  }
  const std::size_t d = embedding.cols();
  Matrix h0(batch.size(), fields * d);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& slots = batch[i].slots;
    if (slots.size() != fields) {
      throw DimensionError("instance " + std::to_string(i) + " has " +
                           std::to_string(slots.size()) + " slots, expected " +
                           std::to_string(fields));
    }
    auto row = h0.row(i);
    for (std::size_t s = 0; s < fields; ++s) {
      if (slots[s].empty()) {
        throw PreconditionError("instance " + std::to_string(i) + " has an empty slot");
      }
      auto part = row.subspan(s * d, d);
      const double w = 1.0 / static_cast<double>(slots[s].size());
      for (FeatureId id : slots[s]) {
        if (id >= embedding.rows()) throw DimensionError("feature id outside the embedding table");
        if (slots[s].size() == 1) {
          std::copy(embedding.row(id).begin(), embedding.row(id).end(), part.begin());
        } else {
          axpy(w, embedding.row(id), part);
        }
      }
    }
  }
  return h0;
}

namespace {

void check_layer(std::size_t layer, const ModelConfig& config) {
  if (layer == 0 || layer > config.layers) {
    throw PreconditionError("layer index " + std::to_string(layer) + " outside [1, " +
                            std::to_string(config.layers) + "]");
  }
}

}  // namespace

AttentionResult edge_to_node_attention(std::size_t layer, const Matrix& prev_nodes,
                                       const Matrix& prev_edges, const FeatureHypergraph& graph,
                                       const LayerParams& params, const ModelConfig& config) {
  check_layer(layer, config);
  if (prev_nodes.rows() != graph.node_count || prev_edges.rows() != graph.edge_count()) {
    throw DimensionError("edge_to_node_attention: nodes " + prev_nodes.shape_string() +
                         ", edges " + prev_edges.shape_string() + " for graph with " +
                         std::to_string(graph.node_count) + " nodes and " +
                         std::to_string(graph.edge_count()) + " edges");
  }
  auto c = attention_forward(prev_nodes, prev_edges, graph.node_edges, params.edge_to_node,
                             config.score_scale());
  return {std::move(c.output), std::move(c.weights)};
}

AttentionResult node_to_edge_attention(std::size_t layer, const Matrix& prev_edges,
                                       const Matrix& nodes, const FeatureHypergraph& graph,
                                       const LayerParams& params, const ModelConfig& config) {
  check_layer(layer, config);
  if (nodes.rows() != graph.node_count || prev_edges.rows() != graph.edge_count()) {
    throw DimensionError("node_to_edge_attention: nodes " + nodes.shape_string() + ", edges " +
                         prev_edges.shape_string() + " for graph with " +
                         std::to_string(graph.node_count) + " nodes and " +
                         std::to_string(graph.edge_count()) + " edges");
  }
  auto c = attention_forward(prev_edges, nodes, graph.edge_nodes, params.node_to_edge,
                             config.score_scale());
  return {std::move(c.output), std::move(c.weights)};
}

ForwardTrace hyperformer_forward(std::span<const SparseInstance> batch, const ModelState& state) {
  const auto& config = state.config;
  ForwardTrace t;
  t.graph = build_batch_hypergraph(batch);
  t.node_states.push_back(
      init_node_representations(batch, t.graph, state.embedding, config.fields));

  Matrix f0(t.graph.edge_count(), config.d);
  for (std::size_t j = 0; j < t.graph.edge_count(); ++j) {
    const auto src = state.embedding.row(t.graph.edge_ids[j]);
    std::copy(src.begin(), src.end(), f0.row(j).begin());
  }
  t.edge_states.push_back(std::move(f0));

  t.slot_edges.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (const auto& slot : batch[i].slots) {
      auto& local = t.slot_edges[i].emplace_back();
      for (FeatureId id : slot) local.push_back(*t.graph.local_edge(id));
    }
  }

  if (!config.message_passing) return t;
  if (state.layers.size() != config.layers) {
    throw DimensionError("model state has " + std::to_string(state.layers.size()) +
                         " layers, config says " + std::to_string(config.layers));
  }

  const double scale = config.score_scale();
  for (std::size_t l = 0; l < config.layers; ++l) {
    const auto& params = state.layers[l];
    LayerTrace lt;
    lt.edge_to_node = attention_forward(t.node_states.back(), t.edge_states.back(),
                                        t.graph.node_edges, params.edge_to_node, scale);
    lt.node_to_edge = attention_forward(t.edge_states.back(), lt.edge_to_node.output,
                                        t.graph.edge_nodes, params.node_to_edge, scale);
    t.node_states.push_back(lt.edge_to_node.output);
    t.edge_states.push_back(lt.node_to_edge.output);
    t.layers.push_back(std::move(lt));
  }
  return t;
}

std::vector<double> instance_embedding(const SparseInstance& instance, const ForwardTrace& trace) {
  const Matrix& final_edges = trace.final_edges();
  const std::size_t d = final_edges.cols();
  std::vector<double> e(instance.slots.size() * d, 0.0);
  for (std::size_t s = 0; s < instance.slots.size(); ++s) {
    const auto& slot = instance.slots[s];
    if (slot.empty()) throw PreconditionError("instance_embedding: empty slot");
    const double w = 1.0 / static_cast<double>(slot.size());
    std::span<double> part(e.data() + s * d, d);
    for (FeatureId id : slot) {
      auto edge = trace.graph.local_edge(id);
      if (!edge) {
        throw PreconditionError("instance_embedding: feature " + std::to_string(id) +
                                " is not part of the traced batch");
      }
      axpy(w, final_edges.row(*edge), part);
    }
  }
  return e;
}

Matrix instance_embeddings(const ForwardTrace& trace, const ModelConfig& config) {
  if (!config.message_passing) return trace.node_states.front();
  const Matrix& final_edges = trace.final_edges();
  const std::size_t d = final_edges.cols();
  const std::size_t n = trace.slot_edges.size();
  Matrix out(n, config.fields * d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    for (std::size_t s = 0; s < trace.slot_edges[i].size(); ++s) {
      const auto& edges = trace.slot_edges[i][s];
      auto part = row.subspan(s * d, d);
      if (edges.size() == 1) {
        std::copy(final_edges.row(edges[0]).begin(), final_edges.row(edges[0]).end(),
                  part.begin());
        continue;
      }
      const double w = 1.0 / static_cast<double>(edges.size());
      for (std::size_t e : edges) axpy(w, final_edges.row(e), part);
    }
  }
  return out;
}

BatchForward forward_batch(std::span<const SparseInstance> batch, const ModelState& state) {
  BatchForward out;
  out.trace = hyperformer_forward(batch, state);
  out.head = head_forward(state.head, instance_embeddings(out.trace, state.config));
  return out;
}

namespace {

void accumulate_attention(GradientStore& store, const std::string& prefix,
                          const AttentionParams& g) {
  store.accumulate(prefix + ".query", g.query);
  store.accumulate(prefix + ".key", g.key);
  store.accumulate(prefix + ".value", g.value);
  if (g.ffn) {
    store.accumulate(prefix + ".ffn_w1", g.ffn->w1);
    store.accumulate(prefix + ".ffn_b1", g.ffn->b1);
    store.accumulate(prefix + ".ffn_w2", g.ffn->w2);
    store.accumulate(prefix + ".ffn_b2", g.ffn->b2);
  }
}

/// Routes d(slot-mean) back to every id of the slot, per instance.
void scatter_slot_means(GradientStore& store, const ForwardTrace& trace, const Matrix& d_rows,
                        std::size_t d) {
  std::vector<double> scaled(d);
  for (std::size_t i = 0; i < trace.slot_edges.size(); ++i) {
    const auto row = d_rows.row(i);
    for (std::size_t s = 0; s < trace.slot_edges[i].size(); ++s) {
      const auto& edges = trace.slot_edges[i][s];
      const double w = 1.0 / static_cast<double>(edges.size());
      for (std::size_t k = 0; k < d; ++k) scaled[k] = w * row[s * d + k];
      for (std::size_t e : edges) store.accumulate_row(kEmbeddingParam, trace.graph.edge_ids[e], scaled);
    }
  }
}

}  // namespace

GradientStore backward(const BatchForward& forward, const ModelState& state,
                       std::span<const double> d_logits) {
  const auto& config = state.config;
  const auto& trace = forward.trace;
  const std::size_t d = config.d;
  if (d_logits.size() != trace.graph.node_count) {
    throw DimensionError("backward: " + std::to_string(d_logits.size()) +
                         " logit gradients for a batch of " +
                         std::to_string(trace.graph.node_count));
  }
  if (config.message_passing && trace.layers.size() != state.layers.size()) {
    throw DimensionError("backward: trace has " + std::to_string(trace.layers.size()) +
                         " layers but the model has " + std::to_string(state.layers.size()));
  }
  if (trace.edge_states.front().cols() != d || state.embedding.cols() != d) {
    throw DimensionError("backward: trace width does not match the model");
  }

  GradientStore store;
  auto head_grads = head_backward(state.head, forward.head, d_logits);
  const auto head_names = Head::param_names(state.head.kind);
  for (std::size_t k = 0; k < head_grads.params.size(); ++k) {
    store.accumulate("head." + head_names[k], head_grads.params[k]);
  }

  if (!config.message_passing) {
    scatter_slot_means(store, trace, head_grads.input, d);
    return store;
  }

  // Gradient w.r.t. F^L from the slot-mean pooling of instance embeddings.
  Matrix d_edges(trace.graph.edge_count(), d);
  for (std::size_t i = 0; i < trace.slot_edges.size(); ++i) {
    const auto row = head_grads.input.row(i);
    for (std::size_t s = 0; s < trace.slot_edges[i].size(); ++s) {
      const auto& edges = trace.slot_edges[i][s];
      const double w = 1.0 / static_cast<double>(edges.size());
      for (std::size_t e : edges) axpy(w, row.subspan(s * d, d), d_edges.row(e));
    }
  }

  const double scale = config.score_scale();
  Matrix d_nodes_from_next;
  for (std::size_t l = config.layers; l-- > 0;) {
    const auto& lt = trace.layers[l];
    const auto& params = state.layers[l];
    const Matrix& prev_nodes = trace.node_states[l];
    const Matrix& prev_edges = trace.edge_states[l];
    const Matrix& nodes = trace.node_states[l + 1];

    auto g_node = attention_backward(d_edges, prev_edges, nodes, trace.graph.edge_nodes,
                                     params.node_to_edge, lt.node_to_edge, scale);
    Matrix d_nodes = std::move(g_node.kv_source);
    if (!d_nodes_from_next.empty()) add_in_place(d_nodes, d_nodes_from_next);
    auto g_edge = attention_backward(d_nodes, prev_nodes, prev_edges, trace.graph.node_edges,
                                     params.edge_to_node, lt.edge_to_node, scale);

    d_edges = std::move(g_node.query_source);
    add_in_place(d_edges, g_edge.kv_source);
    d_nodes_from_next = std::move(g_edge.query_source);

    accumulate_attention(store, layer_prefix(l) + ".edge", g_edge.params);
    accumulate_attention(store, layer_prefix(l) + ".node", g_node.params);
  }

  for (std::size_t j = 0; j < trace.graph.edge_count(); ++j) {
    store.accumulate_row(kEmbeddingParam, trace.graph.edge_ids[j], d_edges.row(j));
  }
  scatter_slot_means(store, trace, d_nodes_from_next, d);
  return store;
}

}  // namespace hyperformer
