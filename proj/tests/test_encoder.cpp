// Copyright 2026 The promptmol Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "promptmol/encoder.hpp"
#include "promptmol/molgraph.hpp"
#include "support/random_molecules.hpp"

using namespace promptmol;
using namespace promptmol::encoder;
using molgraph::parse_smiles;

namespace {

using Vec = std::vector<double>;

Vec row_of(const Matrix& m, Eigen::Index r) {
  Vec v(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(c)] = m(r, c);
  return v;
}

// y = x W + b, written out with plain loops.
Vec affine_ref(const Vec& x, const Matrix& w, const Matrix& b) {
  Vec y(static_cast<std::size_t>(w.cols()), 0.0);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    double s = b(0, j);
    for (Eigen::Index i = 0; i < w.rows(); ++i) s += x[static_cast<std::size_t>(i)] * w(i, j);
    y[static_cast<std::size_t>(j)] = s;
  }
  return y;
}

Vec matvec_ref(const Vec& x, const Matrix& w) {
  return affine_ref(x, w, Matrix::Zero(1, w.cols()));
}

// Straight-line node encoder over a single graph.
std::vector<Vec> encode_ref(const Model& m, const molgraph::MolecularGraph& g) {
  const int n = g.num_atoms();
  const int d = m.config.hidden_dim;
  std::vector<Vec> h(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(d), 0.0));
  for (int v = 0; v < n; ++v) {
    for (int row : atom_feature_rows(g, v)) {
      for (int c = 0; c < d; ++c) h[static_cast<std::size_t>(v)][static_cast<std::size_t>(c)] += m.encoder.atom_embedding->value(row, c);
    }
  }
  for (const GinLayer& l : m.encoder.layers) {
    std::vector<Vec> next;
    const double eps = l.eps->value(0, 0);
    for (int v = 0; v < n; ++v) {
      Vec agg(static_cast<std::size_t>(d));
      for (int c = 0; c < d; ++c) agg[static_cast<std::size_t>(c)] = (1.0 + eps) * h[static_cast<std::size_t>(v)][static_cast<std::size_t>(c)];
      for (const auto& nb : g.neighbors(v)) {
        const int type = molgraph::bond_order_index(g.bond(nb.bond).order);
        for (int c = 0; c < d; ++c) {
          agg[static_cast<std::size_t>(c)] += h[static_cast<std::size_t>(nb.atom)][static_cast<std::size_t>(c)] + m.encoder.bond_embedding->value(type, c);
        }
      }
      Vec hidden = affine_ref(agg, l.w1->value, l.b1->value);
      for (double& x : hidden) x = std::max(0.0, x);
      next.push_back(affine_ref(hidden, l.w2->value, l.b2->value));
    }
    h = next;
  }
  return h;
}

struct AggRef {
  Vec graph;
  std::vector<Vec> attention;  // heads x atoms
};

AggRef aggregate_ref(const PromptAggregator& a, const std::vector<Vec>& nodes) {
  const auto d = nodes[0].size();
  const auto dk = d / static_cast<std::size_t>(a.heads);
  const Vec q = affine_ref(row_of(a.prompt->value, 0), a.wq->value, a.bq->value);
  AggRef out;
  Vec pooled(d, 0.0);
  for (int h = 0; h < a.heads; ++h) {
    Vec logits;
    for (const Vec& x : nodes) {
      const Vec k = matvec_ref(x, a.wk->value);
      double s = 0.0;
      for (std::size_t c = h * dk; c < (h + 1) * dk; ++c) s += q[c] * k[c];
      logits.push_back(s / std::sqrt(static_cast<double>(dk)));
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - mx));
    for (double& l : logits) l /= z;
    for (std::size_t x = 0; x < nodes.size(); ++x) {
      const Vec v = affine_ref(nodes[x], a.wv->value, a.bv->value);
      for (std::size_t c = h * dk; c < (h + 1) * dk; ++c) pooled[c] += logits[x] * v[c];
    }
    out.attention.push_back(logits);
  }
  out.graph = affine_ref(pooled, a.wo->value, a.bo->value);
  return out;
}

EncoderConfig small_config() {
  EncoderConfig c;
  c.hidden_dim = 8;
  c.num_layers = 3;
  c.num_heads = 2;
  return c;
}

// Random non-zero epsilons so the (1 + eps) term is exercised.
void randomize_eps(Model& m, Rng& rng) {
  for (const GinLayer& l : m.encoder.layers) l.eps->value(0, 0) = uniform(rng, -0.3, 0.3);
}

}  // namespace

TEST_CASE("single atom reduces to the mlp of its embedding") {
  Model m;
  EncoderConfig cfg = small_config();
  init_model(m, cfg, 4);
  Rng rng(8);
  randomize_eps(m, rng);
  const auto g = parse_smiles("C");
  const ChannelEmbeddings e = embed_channels(m, g);
  // Zero eps gives mlp(h0); non-zero eps scales the input by (1 + eps).
  Vec h = Vec(static_cast<std::size_t>(cfg.hidden_dim), 0.0);
  for (int row : atom_feature_rows(g, 0)) {
    for (int c = 0; c < cfg.hidden_dim; ++c) h[static_cast<std::size_t>(c)] += m.encoder.atom_embedding->value(row, c);
  }
  for (const GinLayer& l : m.encoder.layers) {
    Vec x = h;
    for (double& v : x) v *= 1.0 + l.eps->value(0, 0);
    Vec hidden = affine_ref(x, l.w1->value, l.b1->value);
    for (double& v : hidden) v = std::max(0.0, v);
    h = affine_ref(hidden, l.w2->value, l.b2->value);
  }
  for (int c = 0; c < cfg.hidden_dim; ++c) CHECK(e.node_embeddings(0, c) == Catch::Approx(h[static_cast<std::size_t>(c)]).margin(1e-12));
  for (int ch = 0; ch < 3; ++ch) {
    for (int hd = 0; hd < cfg.num_heads; ++hd) CHECK(e.attention[static_cast<std::size_t>(ch)](hd, 0) == 1.0);
  }
}

TEST_CASE("zero-initialized encoder outputs zero") {
  ParameterStore store;
  const EncoderParams p = add_encoder_params(store, small_config(), nullptr);
  Tape tape;
  GraphBatch batch;
  batch.add(parse_smiles("CCO"));
  CHECK(encode_nodes(tape, p, batch).value().isZero(0.0));
}

TEST_CASE("node encoder matches the straight-line oracle") {
  Rng rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    Model m;
    init_model(m, small_config(), static_cast<std::uint64_t>(trial));
    randomize_eps(m, rng);
    const auto g = testing::random_molecule(rng);
    const ChannelEmbeddings e = embed_channels(m, g);
    const auto ref = encode_ref(m, g);
    double worst = 0.0;
    for (int v = 0; v < g.num_atoms(); ++v) {
      for (int c = 0; c < m.config.hidden_dim; ++c) {
        worst = std::max(worst, std::abs(e.node_embeddings(v, c) - ref[static_cast<std::size_t>(v)][static_cast<std::size_t>(c)]));
      }
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("prompt aggregation matches the straight-line oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    Model m;
    init_model(m, small_config(), 100 + static_cast<std::uint64_t>(trial));
    molgraph::MolecularGraph g = testing::random_molecule(rng);
    while (g.num_atoms() != 5) g = testing::random_molecule(rng, 3, 8);
    const int n = g.num_atoms();
    const ChannelEmbeddings e = embed_channels(m, g);
    const auto nodes = encode_ref(m, g);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const AggRef r = aggregate_ref(m.aggregators[ch], nodes);
      for (int c = 0; c < m.config.hidden_dim; ++c) CHECK(std::abs(e.graph_vectors[ch](0, c) - r.graph[static_cast<std::size_t>(c)]) <= 1e-12);
      for (int h = 0; h < m.config.num_heads; ++h) {
        for (int x = 0; x < n; ++x) CHECK(std::abs(e.attention[ch](h, x) - r.attention[static_cast<std::size_t>(h)][static_cast<std::size_t>(x)]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("zero key weights give uniform attention") {
  Model m;
  init_model(m, small_config(), 5);
  for (auto& a : m.aggregators) a.wk->value.setZero();
  const auto g = parse_smiles("CC(=O)Oc1ccccc1C(=O)O");
  const ChannelEmbeddings e = embed_channels(m, g);
  for (const auto& att : e.attention) {
    for (Eigen::Index h = 0; h < att.rows(); ++h) {
      for (Eigen::Index x = 0; x < att.cols(); ++x) CHECK(att(h, x) == Catch::Approx(1.0 / g.num_atoms()).margin(1e-15));
    }
  }
}

TEST_CASE("isomorphic graphs give the same multiset of node embeddings") {
  Model m;
  init_model(m, small_config(), 6);
  const auto a = embed_channels(m, parse_smiles("OCC(=O)c1ccncc1"));
  const auto b = embed_channels(m, parse_smiles("c1cc(C(=O)CO)ccn1"));
  auto rows = [](const Matrix& x) {
    std::vector<Vec> r;
    for (Eigen::Index i = 0; i < x.rows(); ++i) r.push_back(row_of(x, i));
    for (auto& v : r) {
      for (double& d : v) d = std::round(d * 1e9) / 1e9;
    }
    std::sort(r.begin(), r.end());
    return r;
  };
  CHECK(rows(a.node_embeddings) == rows(b.node_embeddings));
  for (std::size_t c = 0; c < 3; ++c) CHECK((a.graph_vectors[c] - b.graph_vectors[c]).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("batched embedding equals per-molecule embedding") {
  Model m;
  init_model(m, small_config(), 12);
  std::vector<molgraph::MolecularGraph> mols;
  for (const char* s : {"CCO", "c1ccccc1", "CC(=O)N", "C1CCNCC1", "C"}) mols.push_back(parse_smiles(s));
  const auto all = embed_dataset(m, mols, 2);
  for (std::size_t i = 0; i < mols.size(); ++i) {
    const auto e = embed_channels(m, mols[i]);
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK((all[c].row(static_cast<Eigen::Index>(i)) - e.graph_vectors[c]).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("reverse-mode closed forms") {
  ParameterStore store;
  Parameter& p = store.add("p", 1, 5);
  p.value << 1, -2, 3, 0.5, 7;
  {
    Tape t;
    t.backward(sum(t.parameter(p)));
    CHECK(p.grad.isApprox(Matrix::Ones(1, 5)));
  }
  Parameter& w = store.add("w", 3, 2);
  w.value << 0.1, -0.4, 0.7, 0.2, -0.3, 0.9;
  Matrix x(1, 3);
  x << 1.5, -0.5, 2.0;
  store.zero_grad();
  Tape t;
  t.backward(sum_squares(matmul(t.constant(x), t.parameter(w))));
  const Matrix expected = x.transpose() * (2.0 * (x * w.value));
  CHECK((w.grad - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("frozen parameters receive no gradient and no update") {
  ParameterStore store;
  Parameter& a = store.add("agg.a", 1, 2);
  Parameter& b = store.add("enc.b", 1, 2);
  a.value << 1, 2;
  b.value << 3, 4;
  store.set_frozen("agg.", true);
  store.zero_grad();
  Tape t;
  t.backward(sum_squares(add(t.parameter(a), t.parameter(b))));
  CHECK(a.grad.isZero(0.0));
  CHECK_FALSE(b.grad.isZero(0.0));
  const Matrix before = a.value;
  Adam adam({0.1, 0.9, 0.999, 1e-8});
  adam.step(store);
  CHECK(a.value == before);
  CHECK(b.value(0, 0) < 3.0);
}

TEST_CASE("finite-difference checker") {
  SECTION("quadratic") {
    auto f = [](const Vec& x) { return x[0] * x[0]; };
    auto g = [](const Vec& x) { return Vec{2.0 * x[0]}; };
    const auto rep = finite_diff_check(f, g, {1.0}, 1e-5, 1e-8);
    CHECK(rep.passed);
    CHECK(rep.worst_analytic == 2.0);
    CHECK(rep.max_relative_error < 1e-8);
  }
  SECTION("hinge away from the kink") {
    auto f = [](const Vec& x) { return std::max(0.0, x[0] - 0.3); };
    auto g = [](const Vec& x) { return Vec{x[0] > 0.3 ? 1.0 : 0.0}; };
    const auto rep = finite_diff_check(f, g, {0.3 + 20e-5}, 1e-5, 1e-5);
    CHECK(rep.passed);
    CHECK(rep.non_differentiable == 0);
  }
  SECTION("hinge exactly at the kink") {
    auto f = [](const Vec& x) { return std::max(0.0, x[0]); };
    auto g = [](const Vec& x) { return Vec{x[0] > 0.0 ? 1.0 : 0.0}; };
    const auto rep = finite_diff_check(f, g, {0.0}, 1e-5, 1e-5);
    CHECK(rep.non_differentiable == 1);
    CHECK(rep.failing == 0);
  }
  SECTION("wrong gradient is caught") {
    auto f = [](const Vec& x) { return std::sin(x[0]); };
    auto g = [](const Vec& x) { return Vec{std::cos(x[0]) * 1.001}; };
    const auto rep = finite_diff_check(f, g, {0.4}, 1e-5, 1e-5);
    CHECK_FALSE(rep.passed);
    CHECK(rep.failing == 1);
  }
}

TEST_CASE("encoder gradients match finite differences on a small graph") {
  Model m;
  EncoderConfig cfg = small_config();
  cfg.num_layers = 2;
  init_model(m, cfg, 31);
  const auto g = parse_smiles("CC(=O)N");
  GraphBatch batch;
  batch.add(g);
  auto loss = [&](Tape& t) {
    const Var nodes = encode_nodes(t, m.encoder, batch);
    const AggregateVars a = prompt_aggregate(t, m.aggregators[0], nodes, batch.offsets);
    return sum_squares(a.graph_vectors);
  };
  // Loss values are O(1) so that difference quotients resolve gradients.
  const auto rep = check_parameters(m.store, m.store.all(), loss, 1e-5, 1e-5);
  INFO("max rel " << rep.max_relative_error << " at " << rep.worst_index << " analytic " << rep.worst_analytic
                  << " numeric " << rep.worst_numeric << " ulps " << rep.failing_error_in_ulps);
  CHECK(rep.failing_error_in_ulps <= 4.0);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Model m;
  init_model(m, small_config(), 99);
  const auto dir = std::filesystem::temp_directory_path() / "promptmol_encoder_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "model.mspc").string();
  save_model(path, m);
  Model back;
  load_model(path, back);
  CHECK(back.config.hidden_dim == 8);
  CHECK(back.config.num_layers == 3);
  CHECK(back.config.num_heads == 2);
  const auto a = m.store.all();
  const auto b = back.store.all();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    REQUIRE(a[i]->value.size() == b[i]->value.size());
    CHECK(std::memcmp(a[i]->value.data(), b[i]->value.data(), sizeof(double) * static_cast<std::size_t>(a[i]->value.size())) == 0);
  }
  const auto g = parse_smiles("CCOc1ccccc1");
  CHECK(embed_channels(m, g).graph_vectors[1] == embed_channels(back, g).graph_vectors[1]);

  std::ofstream(dir / "bad.mspc") << "nope";
  Model bad;
  CHECK_THROWS_AS(load_model((dir / "bad.mspc").string(), bad), InputError);
  Model missing;
  CHECK_THROWS_AS(load_model((dir / "missing.mspc").string(), missing), InputError);
}

TEST_CASE("non-finite values raise numeric errors") {
  Tape t;
  Matrix x(1, 1);
  x(0, 0) = std::nan("");
  CHECK_THROWS_AS(t.constant(x), NumericError);
}
