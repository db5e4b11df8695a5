#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "hyperformer/checkpoint.hpp"
#include "hyperformer/errors.hpp"
#include "hyperformer/heads.hpp"
#include "hyperformer/model.hpp"
#include "test_support.hpp"

using namespace hyperformer;
using hyperformer::testing::random_batch;
using hyperformer::testing::random_matrix;
using hyperformer::testing::randomize;

namespace {

SparseInstance inst(std::vector<std::vector<FeatureId>> slots, int label = 0) {
  SparseInstance s;
  s.label = label;
  s.slots = std::move(slots);
  return s;
}

void check_rows(const Matrix& m, const std::vector<std::vector<double>>& expected, double tol) {
  REQUIRE(m.rows() == expected.size());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    REQUIRE(m.cols() == expected[r].size());
    for (std::size_t c = 0; c < m.cols(); ++c) {
      CHECK(m(r, c) == doctest::Approx(expected[r][c]).epsilon(tol));
    }
  }
}

void check_weights(const std::vector<std::vector<double>>& w,
                   const std::vector<std::vector<double>>& expected) {
  REQUIRE(w.size() == expected.size());
  for (std::size_t r = 0; r < w.size(); ++r) {
    REQUIRE(w[r].size() == expected[r].size());
    for (std::size_t k = 0; k < w[r].size(); ++k) {
      CHECK(w[r][k] == doctest::Approx(expected[r][k]).epsilon(1e-13));
    }
  }
}

// Two nodes, three edges: node 0 = {a, b}, node 1 = {c, b}; a and c sit in
// field 0, b in field 1. Ids: a=0, c=1, unk0=2, b=3, unk1=4. Parameters and
// expected values come from tests/oracles/toy_hyperformer.py.
struct Toy {
  ModelState state;
  std::vector<SparseInstance> batch;
};

Toy toy(bool scale_scores) {
  ModelConfig cfg;
  cfg.d = 2;
  cfg.layers = 1;
  cfg.fields = 2;
  cfg.scale_scores = scale_scores;
  Toy t{ModelState::allocate(cfg, 5), {inst({{0}, {3}}), inst({{1}, {3}})}};
  auto& e = t.state.embedding;
  e = Matrix{{1.0, 0.5}, {0.25, 1.5}, {0, 0}, {-0.5, 1.0}, {0, 0}};
  auto& l = t.state.layers[0];
  l.edge_to_node.query = Matrix{{0.5, -0.25}, {0.25, 0.5}, {-0.5, 0.75}, {1.0, 0.25}};
  l.edge_to_node.key = Matrix{{1.0, 0.5}, {-0.5, 1.0}};
  l.edge_to_node.value = Matrix{{0.75, 0.5}, {0.5, 1.0}};
  l.node_to_edge.query = Matrix{{0.5, 1.0}, {-1.0, 0.5}};
  l.node_to_edge.key = Matrix{{1.0, -0.25}, {0.5, 0.75}};
  l.node_to_edge.value = Matrix{{0.5, -0.25}, {1.0, 0.75}};
  return t;
}

}  // namespace

TEST_CASE("init_model: deterministic with the documented shapes") {
  ModelConfig cfg;
  cfg.d = 4;
  cfg.layers = 2;
  cfg.fields = 3;
  cfg.use_ffn = true;
  const auto a = init_model(cfg, 50, 7);
  const auto b = init_model(cfg, 50, 7);
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].name == pb[i].name);
    CHECK(bitwise_equal(*pa[i].value, *pb[i].value));
  }
  CHECK(a.embedding.rows() == 50);
  CHECK(a.embedding.cols() == 4);
  CHECK(a.layers[0].edge_to_node.query.rows() == 12);
  CHECK(a.layers[0].edge_to_node.query.cols() == 4);
  CHECK(a.layers[1].edge_to_node.query.rows() == 4);
  CHECK(a.layers[1].edge_to_node.query.cols() == 4);
  CHECK(a.layers[0].node_to_edge.key.rows() == 4);
  REQUIRE(a.layers[0].edge_to_node.ffn);
  CHECK(a.layers[0].edge_to_node.ffn->w1.rows() == 4);

  const auto c = init_model(cfg, 50, 8);
  CHECK_FALSE(bitwise_equal(a.embedding, c.embedding));
}

TEST_CASE("init_model: Xavier bounds, zero biases, centred entries") {
  ModelConfig cfg;
  cfg.d = 10;
  cfg.fields = 2;
  cfg.head = HeadKind::mlp;
  const auto s = init_model(cfg, 10000, 3);
  for (const auto& p : s.parameters()) {
    const double limit = xavier_limit(p.value->rows(), p.value->cols());
    const bool bias = p.name.find("_b") != std::string::npos;
    for (double v : p.value->values()) {
      if (bias) {
        CHECK(v == 0.0);
      } else {
        CHECK(std::abs(v) <= limit);
      }
    }
  }
  // 1e5 uniform entries on [-a, a]: the mean has standard deviation a / sqrt(3e5).
  const double limit = xavier_limit(10000, 10);
  const auto values = s.embedding.values();
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  CHECK(std::abs(mean) < 3.0 * limit / std::sqrt(3.0 * static_cast<double>(values.size())));
}

TEST_CASE("model config validation") {
  ModelConfig cfg;
  cfg.d = 0;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.d = 2;
  cfg.layers = 0;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.layers = 1;
  cfg.head = HeadKind::two_tower;
  cfg.fields = 2;
  cfg.user_fields = 2;
  CHECK_THROWS_AS(cfg.validate(), PreconditionError);
  cfg.user_fields = 1;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("node initialization concatenates per-slot means") {
  const Matrix table{{1, 0}, {0, 1}, {2, 0}, {0, 2}};
  const std::vector<SparseInstance> single = {inst({{0}, {1}})};
  auto g = build_batch_hypergraph(single);
  CHECK(init_node_representations(single, g, table, 2) == Matrix{{1, 0, 0, 1}});

  const std::vector<SparseInstance> multi = {inst({{2, 3}})};
  g = build_batch_hypergraph(multi);
  CHECK(init_node_representations(multi, g, table, 1) == Matrix{{1, 1}});

  CHECK_THROWS_AS(init_node_representations(single, build_batch_hypergraph(single), table, 3),
                  DimensionError);
}

TEST_CASE("node initialization permutes with the batch") {
  Rng rng(13);
  const Matrix table = random_matrix(rng, 30, 3);
  const auto batch = random_batch(rng, 12, 3, 10, 3);
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  std::vector<SparseInstance> permuted;
  for (std::size_t i : perm) permuted.push_back(batch[i]);
  const Matrix h = init_node_representations(batch, build_batch_hypergraph(batch), table, 3);
  const Matrix hp = init_node_representations(permuted, build_batch_hypergraph(permuted), table, 3);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(std::equal(hp.row(i).begin(), hp.row(i).end(), h.row(perm[i]).begin()));
  }
}

TEST_CASE("singleton incidences get weight one") {
  Rng rng(4);
  ModelConfig cfg;
  cfg.d = 3;
  cfg.layers = 1;
  cfg.fields = 2;
  auto state = init_model(cfg, 20, 1);
  randomize(state, rng, 1.0);
  // Node 0 has two edges, node 1 has one (id 9 repeated is one incidence)
  // and edge 9 is shared.
  const std::vector<SparseInstance> batch = {inst({{0}, {9}}), inst({{9}, {9}})};
  const auto g = build_batch_hypergraph(batch);
  const Matrix h0 = init_node_representations(batch, g, state.embedding, 2);
  Matrix f0(g.edge_count(), 3);
  for (std::size_t j = 0; j < g.edge_count(); ++j) {
    std::copy_n(state.embedding.row(g.edge_ids[j]).begin(), 3, f0.row(j).begin());
  }
  const auto en = edge_to_node_attention(1, h0, f0, g, state.layers[0], cfg);
  CHECK(en.weights[1] == std::vector<double>{1.0});
  const auto ne = node_to_edge_attention(1, f0, en.output, g, state.layers[0], cfg);
  CHECK(ne.weights[0] == std::vector<double>{1.0});
  CHECK(ne.weights[1].size() == 2);

  CHECK_THROWS_AS(edge_to_node_attention(2, h0, f0, g, state.layers[0], cfg), PreconditionError);
  CHECK_THROWS_AS(edge_to_node_attention(1, f0, f0, g, state.layers[0], cfg), DimensionError);
}

TEST_CASE("identity projections and equal rows split attention evenly") {
  ModelConfig cfg;
  cfg.d = 2;
  cfg.layers = 2;
  cfg.fields = 1;
  auto state = ModelState::allocate(cfg, 4);
  auto& l = state.layers[1];
  for (auto* p : {&l.edge_to_node, &l.node_to_edge}) {
    p->query = Matrix::identity(2);
    p->key = Matrix::identity(2);
    p->value = Matrix::identity(2);
  }
  const std::vector<SparseInstance> batch = {inst({{0, 1}}), inst({{0, 1}})};
  const auto g = build_batch_hypergraph(batch);
  const Matrix nodes{{0.3, -0.2}, {0.7, 0.1}};
  const Matrix equal_edges{{0.5, 0.4}, {0.5, 0.4}};
  const auto en = edge_to_node_attention(2, nodes, equal_edges, g, l, cfg);
  CHECK(en.weights[0] == std::vector<double>{0.5, 0.5});
  const Matrix equal_nodes{{0.2, 0.9}, {0.2, 0.9}};
  const auto ne = node_to_edge_attention(2, equal_edges, equal_nodes, g, l, cfg);
  CHECK(ne.weights[0] == std::vector<double>{0.5, 0.5});
}

TEST_CASE("toy graph matches the hand evaluation") {
  struct Expected {
    bool scaled;
    std::vector<std::vector<double>> alpha, h1, beta, f1, e;
  };
  const Expected cases[] = {
      {false,
       {{0.9626731126558706, 0.037326887344129464}, {0.7969253718105298, 0.2030746281894702}},
       {{0.9673389735738868, 0.9906682781639677}, {0.7725018645960554, 1.4473097003342137}},
       {{1.0}, {0.5104620984116499, 0.48953790158835}, {1.0}},
       {{1.474337764950911, 0.5011664652295041},
        {1.6501909737981788, 0.6926689652902976},
        {1.8335606326322413, 0.8923568091016464}},
       {{1.474337764950911, 0.5011664652295041, 1.6501909737981788, 0.6926689652902976},
        {1.8335606326322413, 0.8923568091016464, 1.6501909737981788, 0.6926689652902976}}},
      {true,
       {{0.9087193138925322, 0.09128068610746777}, {0.7244707415533275, 0.2755292584466726}},
       {{0.9201293996559657, 0.9771798284731331}, {0.7136324775120786, 1.3839118988591617}},
       {{1.0}, {0.4993081656308619, 0.5006918343691382}, {1.0}},
       {{1.437244528301116, 0.5028525214408583},
        {1.589196293349552, 0.681435921939563},
        {1.7407281376152008, 0.8595258047663517}},
       {{1.437244528301116, 0.5028525214408583, 1.589196293349552, 0.681435921939563},
        {1.7407281376152008, 0.8595258047663517, 1.589196293349552, 0.681435921939563}}},
  };
  for (const auto& ex : cases) {
    CAPTURE(ex.scaled);
    const Toy t = toy(ex.scaled);
    const auto trace = hyperformer_forward(t.batch, t.state);
    CHECK(trace.graph.edge_ids == std::vector<FeatureId>{0, 3, 1});
    check_weights(trace.alpha(1), ex.alpha);
    check_weights(trace.beta(1), ex.beta);
    check_rows(trace.node_states[1], ex.h1, 1e-13);
    check_rows(trace.final_edges(), ex.f1, 1e-13);
    check_rows(instance_embeddings(trace, t.state.config), ex.e, 1e-13);
    for (std::size_t i = 0; i < 2; ++i) {
      const auto e = instance_embedding(t.batch[i], trace);
      for (std::size_t k = 0; k < 4; ++k) CHECK(e[k] == doctest::Approx(ex.e[i][k]).epsilon(1e-13));
    }
  }
}

TEST_CASE("forward: minimal stack, zero fixed point, normalization") {
  ModelConfig cfg;
  cfg.d = 3;
  cfg.layers = 1;
  cfg.fields = 2;
  auto state = init_model(cfg, 12, 2);
  const std::vector<SparseInstance> single = {inst({{1, 4}, {8}})};
  const auto trace = hyperformer_forward(single, state);
  CHECK(trace.final_edges().rows() == 3);
  CHECK(all_finite(trace.final_edges()));

  state.embedding.fill(0.0);
  const std::vector<SparseInstance> pair = {inst({{1}, {8}}), inst({{2}, {8}})};
  const auto zero = hyperformer_forward(pair, state);
  CHECK(zero.node_states[1] == Matrix(2, 3));
  CHECK(zero.final_edges() == Matrix(3, 3));

  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    ModelConfig c2;
    c2.d = 1 + rng.uniform_index(4);
    c2.layers = 1 + rng.uniform_index(3);
    c2.fields = 1 + rng.uniform_index(3);
    c2.scale_scores = rng.bernoulli(0.5);
    c2.use_ffn = rng.bernoulli(0.5);
    auto s2 = init_model(c2, c2.fields * 8, trial);
    const auto batch = random_batch(rng, 1 + rng.uniform_index(10), c2.fields, 8, 2);
    const auto tr = hyperformer_forward(batch, s2);
    for (std::size_t l = 1; l <= c2.layers; ++l) {
      for (const auto& row : tr.alpha(l)) CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-12);
      for (const auto& row : tr.beta(l)) CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("forward is permutation equivariant") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig cfg;
    cfg.d = 3;
    cfg.layers = 2;
    cfg.fields = 3;
    cfg.use_ffn = trial % 2 == 1;
    auto state = init_model(cfg, 30, trial);
    const auto batch = random_batch(rng, 10, 3, 10, 2);
    std::vector<std::size_t> perm(10);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<SparseInstance> permuted;
    for (std::size_t i : perm) permuted.push_back(batch[i]);
    const auto a = hyperformer_forward(batch, state);
    const auto b = hyperformer_forward(permuted, state);
    for (std::size_t l = 0; l <= 2; ++l) {
      for (std::size_t i = 0; i < 10; ++i) {
        const auto ra = a.node_states[l].row(perm[i]);
        const auto rb = b.node_states[l].row(i);
        for (std::size_t k = 0; k < ra.size(); ++k) CHECK(hyperformer::testing::relative_difference(ra[k], rb[k]) <= 1e-10);
      }
      for (std::size_t j = 0; j < a.graph.edge_count(); ++j) {
        const auto jb = b.graph.local_edge(a.graph.edge_ids[j]);
        REQUIRE(jb);
        const auto ra = a.edge_states[l].row(j);
        const auto rb = b.edge_states[l].row(*jb);
        for (std::size_t k = 0; k < ra.size(); ++k) CHECK(hyperformer::testing::relative_difference(ra[k], rb[k]) <= 1e-10);
      }
    }
  }
}

TEST_CASE("instance embedding reads final edge rows") {
  ModelConfig cfg;
  cfg.d = 3;
  cfg.layers = 2;
  cfg.fields = 1;
  const auto state = init_model(cfg, 6, 4);
  const std::vector<SparseInstance> batch = {inst({{2}}), inst({{2}}), inst({{0}})};
  const auto trace = hyperformer_forward(batch, state);
  const auto e0 = instance_embedding(batch[0], trace);
  const auto row = trace.final_edges().row(*trace.graph.local_edge(2));
  CHECK(std::equal(e0.begin(), e0.end(), row.begin()));
  CHECK(instance_embedding(batch[1], trace) == e0);
  CHECK_THROWS_AS(instance_embedding(inst({{5}}), trace), PreconditionError);

  auto ablation = cfg;
  ablation.message_passing = false;
  auto plain = state;
  plain.config = ablation;
  const auto t2 = hyperformer_forward(batch, plain);
  CHECK(instance_embeddings(t2, ablation) == t2.node_states.front());
}

TEST_CASE("scaling an aligned edge row raises its attention weight") {
  ModelConfig cfg;
  cfg.d = 2;
  cfg.layers = 1;
  cfg.fields = 2;
  auto state = ModelState::allocate(cfg, 4);
  auto& p = state.layers[0];
  p.edge_to_node.query = Matrix{{1, 0}, {0, 1}, {1, 0}, {0, 1}};
  p.edge_to_node.key = Matrix::identity(2);
  p.edge_to_node.value = Matrix::identity(2);
  p.node_to_edge.query = Matrix::identity(2);
  p.node_to_edge.key = Matrix::identity(2);
  p.node_to_edge.value = Matrix::identity(2);
  state.embedding = Matrix{{0.4, 0.3}, {0, 0}, {0.1, 0.5}, {0, 0}};
  const std::vector<SparseInstance> batch = {inst({{0}, {2}})};
  const double before = hyperformer_forward(batch, state).alpha(1)[0][0];
  // The query is (0.5, 0.8); edge 0's key (0.4, 0.3) has a positive dot with it.
  for (double& v : state.embedding.row(0)) v *= 10.0;
  const double after = hyperformer_forward(batch, state).alpha(1)[0][0];
  CHECK(after > before);
}

TEST_CASE("heads: logistic and mlp closed forms") {
  const std::vector<double> e = {0.5, -1.0, 2.0};
  auto logistic = Head::create(HeadKind::logistic, 3, 0, 0, 0);
  CHECK(predict_head(e, logistic) == 0.0);
  const double norm2 = 0.25 + 1.0 + 4.0;
  logistic.params[0] = Matrix{{0.5 / norm2}, {-1.0 / norm2}, {2.0 / norm2}};
  CHECK(predict_head(e, logistic) == doctest::Approx(1.0).epsilon(1e-15));

  Rng rng(6);
  auto mlp = Head::create(HeadKind::mlp, 3, 4, 0, 0);
  for (std::size_t i = 0; i < 4; ++i) mlp.params[i] = random_matrix(rng, mlp.params[i].rows(), mlp.params[i].cols());
  mlp.params[5] = Matrix{{-0.75}};
  CHECK(predict_head(e, mlp) == -0.75);

  CHECK_THROWS_AS(predict_head(std::vector<double>{1.0, 2.0}, logistic), DimensionError);
}

TEST_CASE("heads: crossnet matches the explicit formula") {
  Rng rng(12);
  auto cross = Head::create(HeadKind::crossnet, 3, 0, 0, 0);
  for (auto& p : cross.params) p = random_matrix(rng, p.rows(), p.cols());
  const std::vector<double> x = {0.3, -0.6, 1.2};
  double logit = cross.params[3](0, 0);
  for (std::size_t j = 0; j < 3; ++j) {
    double inner = cross.params[1](0, j);
    for (std::size_t k = 0; k < 3; ++k) inner += x[k] * cross.params[0](k, j);
    const double crossed = x[j] * inner + x[j];
    logit += crossed * cross.params[2](j, 0);
  }
  CHECK(predict_head(x, cross) == doctest::Approx(logit).epsilon(1e-14));
}

TEST_CASE("two-tower scoring") {
  auto head = Head::create(HeadKind::two_tower, 5, 3, 2, 2);
  // Zero weights leave the output biases: both towers emit (1, 1).
  head.params[3] = Matrix{{1, 1}};
  head.params[7] = Matrix{{1, 1}};
  const std::vector<double> u = {0.1, 0.2}, v = {0.3, 0.4, 0.5};
  CHECK(two_tower_score(u, v, head) == 2.0);
  head.params[7] = Matrix{{1, -1}};
  CHECK(two_tower_score(u, v, head) == 0.0);

  Rng rng(2);
  for (auto& p : head.params) p = random_matrix(rng, p.rows(), p.cols());
  const auto tu = user_tower(head, u);
  const auto tv = item_tower(head, v);
  CHECK(two_tower_score(u, v, head) == doctest::Approx(dot(tu, tv)).epsilon(1e-15));
  std::vector<double> joint = u;
  joint.insert(joint.end(), v.begin(), v.end());
  CHECK(predict_head(joint, head) == doctest::Approx(dot(tu, tv)).epsilon(1e-14));

  CHECK_THROWS_AS(two_tower_score(v, u, head), DimensionError);
  CHECK(parse_head_kind("two-tower") == HeadKind::two_tower);
  CHECK(parse_head_kind("two_tower") == HeadKind::two_tower);
  CHECK_THROWS_AS(parse_head_kind("deep"), PreconditionError);
}

TEST_CASE("checkpoint round trip is bitwise exact") {
  for (HeadKind kind : {HeadKind::logistic, HeadKind::mlp, HeadKind::crossnet, HeadKind::two_tower}) {
    ModelConfig cfg;
    cfg.d = 3;
    cfg.layers = 2;
    cfg.fields = 3;
    cfg.use_ffn = kind == HeadKind::mlp;
    cfg.scale_scores = kind == HeadKind::crossnet;
    cfg.head = kind;
    cfg.hidden = 5;
    cfg.tower_width = 4;
    cfg.user_fields = 1;
    const auto state = init_model(cfg, 17, 9);
    std::stringstream buf;
    save_checkpoint(buf, state);
    std::string header;
    std::getline(buf, header);
    CHECK(header == "HYPERFORMER v1 17 3 2 3 " + std::string(to_string(kind)) + " " +
                        (cfg.scale_scores ? "1" : "0") + " " + (cfg.use_ffn ? "1" : "0"));
    buf.seekg(0);
    const auto loaded = load_checkpoint(buf);
    if (kind == HeadKind::mlp || kind == HeadKind::two_tower) CHECK(loaded.config.hidden == 5);
    if (kind == HeadKind::two_tower) {
      CHECK(loaded.config.tower_width == 4);
      CHECK(loaded.config.user_fields == 1);
    }
    const auto a = state.parameters();
    const auto b = loaded.parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].name == b[i].name);
      CHECK(bitwise_equal(*a[i].value, *b[i].value));
    }
  }
}

TEST_CASE("checkpoint rejects damaged input") {
  ModelConfig cfg;
  cfg.d = 2;
  cfg.layers = 1;
  cfg.fields = 1;
  std::stringstream buf;
  save_checkpoint(buf, init_model(cfg, 4, 1));
  const std::string good = buf.str();

  std::istringstream truncated(good.substr(0, good.size() - 5));
  CHECK_THROWS_AS(load_checkpoint(truncated), DataError);
  std::istringstream wrong_magic("HYPERFORMAT v1 4 2 1 1 logistic 0 0\n");
  CHECK_THROWS_AS(load_checkpoint(wrong_magic), DataError);
  std::string renamed = good;
  renamed.replace(renamed.find("embedding"), 9, "embeddinx");
  std::istringstream bad_name(renamed);
  CHECK_THROWS_AS(load_checkpoint(bad_name), DataError);
}
