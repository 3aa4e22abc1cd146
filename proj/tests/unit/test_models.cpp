#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "nff/error.hpp"
#include "nff/models.hpp"
#include "nff/training.hpp"

using namespace nff;
using nff::test::random_tensor;

namespace {

MlpConfig main_net(std::size_t p, std::size_t q, ActivationKind act = ActivationKind::ISLU1b, std::size_t in = 3) {
  return MlpConfig::from_pl_qn(p, q, in, 1, ActivationSpec::of(act));
}

WgnConfig wgn_config(ActivationKind act = ActivationKind::ISLU1b) {
  WgnConfig c;
  c.main = main_net(4, 16, act);
  c.meta_dim = 3;
  return c;
}

void perturb_params(Model& m, Rng& rng, double amount = 0.1) {
  for (Param* p : m.parameters())
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] += rng.uniform(-amount, amount);
}

// Scalar-loop MLP oracle for fixed (non-trainable) activations.
double mlp_oracle(const Mlp& mlp, const std::vector<double>& x, double (*act)(double)) {
  std::vector<double> h = x;
  const std::size_t L = mlp.config.weight_layers();
  for (std::size_t l = 0; l < L; ++l) {
    const Tensor3& W = mlp.params.weights[l].value;
    const Tensor3& b = mlp.params.biases[l].value;
    std::vector<double> next(W.shape().d2);
    for (std::size_t j = 0; j < next.size(); ++j) {
      double s = b(0, 0, j);
      for (std::size_t k = 0; k < h.size(); ++k) s += h[k] * W(0, k, j);
      next[j] = l + 1 < L ? act(s) : s;
    }
    h = next;
  }
  return h[0];
}

Tensor3 row_of(const Tensor3& t, std::size_t m) {
  Tensor3 out({1, t.shape().d1, t.shape().d2});
  for (std::size_t r = 0; r < t.shape().d1; ++r)
    for (std::size_t c = 0; c < t.shape().d2; ++c) out(0, r, c) = t(m, r, c);
  return out;
}

}  // namespace

TEST_CASE("(pL,qN) naming and shape chain") {
  const MlpConfig c = main_net(4, 16);
  CHECK(c.layer_sizes == std::vector<std::size_t>{3, 16, 16, 16, 1});
  CHECK(c.hidden_layers() == 3);
  CHECK(c.tag() == "(4L,16N)");
  CHECK(main_net(1, 8).layer_sizes == std::vector<std::size_t>{3, 1});
  CHECK_THROWS(MlpConfig::from_pl_qn(0, 16, 3, 1, ActivationSpec::of(ActivationKind::ISLU0)));
}

TEST_CASE("parameter counts") {
  CHECK(count_params(main_net(4, 16, ActivationKind::ISLU0)).main == 625);
  CHECK(count_params(main_net(4, 16, ActivationKind::ISLU1b)).main == 628);
  CHECK(count_params(main_net(4, 64, ActivationKind::ISLU0)).main == 3 * 64 + 64 + 2 * (64 * 64 + 64) + 64 + 1);
  CHECK(count_params(main_net(4, 64, ActivationKind::ISLU0)).main == 8641);
  CHECK(count_params(MlpConfig{}).main == 0);

  // Generators [3,40,40,out]; one per weight block, bias block and beta.
  const WgnConfig w = wgn_config();
  auto gen = [](std::size_t out) { return 3 * 40 + 40 + 40 * 40 + 40 + 40 * out + out; };
  const std::size_t expected = gen(48) + gen(16) + gen(256) + gen(16) + gen(256) + gen(16) + gen(16) + gen(1) +
                               3 * gen(1);
  const ParamCount pc = count_params(w);
  CHECK(pc.main == 628);
  CHECK(pc.generators == expected);
  CHECK(pc.trainable == expected);

  Rng rng(1);
  WgnModel model(w, rng);
  std::size_t scalars = 0;
  for (const Param* p : model.parameters()) scalars += p->value.size();
  CHECK(scalars == pc.trainable);
  const Mlp nf = model.extract(std::vector<double>{0.2, 0.4, 0.6});
  CHECK(count_params(nf.config).main == pc.main);
}

TEST_CASE("mlp_forward: trivial cases and scalar-loop oracle") {
  Rng rng(2);
  SUBCASE("zero weights give the output bias") {
    Mlp m = make_mlp(main_net(3, 5, ActivationKind::ISLU0), rng);
    for (auto& w : m.params.weights) w.value.fill(0.0);
    m.params.biases.back().value.fill(0.75);
    const Tensor3 y = mlp_predict(m, random_tensor({1, 9, 3}, rng));
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == 0.75);
  }
  SUBCASE("random parameters") {
    Mlp m = make_mlp(main_net(4, 7, ActivationKind::ELU), rng);
    for (auto& b : m.params.biases)
      for (std::size_t i = 0; i < b.value.size(); ++i) b.value[i] = rng.uniform(-0.5, 0.5);
    const Tensor3 x = random_tensor({1, 20, 3}, rng, -2.0, 2.0);
    const Tensor3 y = mlp_predict(m, x);
    for (std::size_t r = 0; r < 20; ++r) {
      CHECK(std::abs(y(0, r, 0) - mlp_oracle(m, {x(0, r, 0), x(0, r, 1), x(0, r, 2)}, elu)) < 1e-12);
    }
  }
  SUBCASE("input width mismatch") {
    Mlp m = make_mlp(main_net(2, 4, ActivationKind::ISLU0), rng);
    CHECK_THROWS_AS(mlp_predict(m, Tensor3({1, 2, 4})), DimensionError);
  }
}

TEST_CASE("MLP init: uniform within +-sqrt(1/fan_in), zero biases, canonical beta") {
  Rng rng(3);
  const Mlp m = make_mlp(main_net(4, 64, ActivationKind::ISLU1b), rng);
  for (std::size_t l = 0; l < m.params.weights.size(); ++l) {
    const double bound = std::sqrt(1.0 / static_cast<double>(m.config.layer_sizes[l]));
    for (double w : m.params.weights[l].value.vec()) CHECK(std::abs(w) <= bound);
    for (double b : m.params.biases[l].value.vec()) CHECK(b == 0.0);
  }
  REQUIRE(m.params.betas.size() == 3);
  for (const auto& b : m.params.betas) CHECK(b.value.item() == 0.0);
}

TEST_CASE("dump_layer_outputs") {
  Rng rng(4);
  Mlp m = make_mlp(MlpConfig::from_pl_qn(3, 4, 1, 1, ActivationSpec::of(ActivationKind::ISLU0)), rng);
  const std::vector<double> grid{-1.0, 0.0, 0.5, 2.0};
  const auto layers = dump_layer_outputs(m, grid);
  REQUIRE(layers.size() == 3);
  CHECK(layers[0].shape() == Shape{1, 4, 4});
  CHECK(layers[2].shape() == Shape{1, 4, 1});
  const Tensor3 y = mlp_predict(m, Tensor3({1, 4, 1}, grid));
  CHECK(max_abs_diff(layers[2], y) == 0.0);

  for (auto& w : m.params.weights) w.value.fill(0.0);
  for (const auto& layer : dump_layer_outputs(m, grid)) {
    for (std::size_t j = 0; j < layer.shape().d2; ++j)
      for (std::size_t i = 1; i < 4; ++i) CHECK(layer(0, i, j) == layer(0, 0, j));
  }
  CHECK_THROWS_AS(dump_layer_outputs(make_mlp(main_net(2, 3), rng), grid), DimensionError);
}

TEST_CASE("trained toy cubic is reproduced by the final layer") {
  // D = 0.2 (x-1) x (x+1.5) on [-2, 2].
  Rng rng(5);
  MlpModel model(MlpConfig::from_pl_qn(4, 16, 1, 1, ActivationSpec::of(ActivationKind::ISLU0)), 0, rng);
  MetaDataset md;
  MetaTask t;
  t.data = {Tensor3({1, 201, 1}), Tensor3({1, 201, 1})};
  for (std::size_t i = 0; i < 201; ++i) {
    const double x = -2.0 + 0.02 * static_cast<double>(i);
    t.data.x(0, i, 0) = x;
    t.data.y(0, i, 0) = 0.2 * (x - 1) * x * (x + 1.5);
  }
  md.tasks.push_back(t);
  TrainConfig tc = TrainConfig::desk();
  tc.total_updates = 3000;
  tc.task_batch = 64;
  tc.pooled = true;
  train(model, md, tc);
  std::vector<double> grid;
  for (std::size_t i = 0; i < 201; ++i) grid.push_back(t.data.x(0, i, 0));
  const auto layers = dump_layer_outputs(model.mlp(), grid);
  double sse = 0.0;
  for (std::size_t i = 0; i < 201; ++i) sse += std::pow(layers.back()(0, i, 0) - t.data.y(0, i, 0), 2);
  // RMS error about 0.02 over a target range of about 1.6.
  CHECK(sse < 0.1);
  const Tensor3 direct = mlp_predict(model.mlp(), t.data.x);
  for (std::size_t i = 0; i < 201; ++i) CHECK(layers.back()(0, i, 0) == direct(0, i, 0));
}

TEST_CASE("wgn_forward meta-batch consistency and NF extraction") {
  Rng rng(6);
  for (ActivationKind act : {ActivationKind::ISLU0, ActivationKind::ISLU1b}) {
    WgnModel model(wgn_config(act), rng);
    perturb_params(model, rng);
    const Tensor3 z = random_tensor({4, 1, 3}, rng, 0.0, 1.0);
    const Tensor3 x = random_tensor({4, 6, 3}, rng, 0.0, 1.0);
    const Tensor3 batched = predict(model, z, x);
    for (std::size_t m = 0; m < 4; ++m) {
      const Tensor3 single = predict(model, row_of(z, m), row_of(x, m));
      CHECK(max_abs_diff(single, row_of(batched, m)) < 1e-10);
      const Mlp nf = model.extract(row_of(z, m).data());
      CHECK(max_abs_diff(mlp_predict(nf, row_of(x, m)), single) < 1e-12);
    }
    const Mlp a = model.extract(std::vector<double>{0.1, 0.2, 0.3});
    const Mlp b = model.extract(std::vector<double>{0.9, 0.2, 0.3});
    CHECK(max_abs_diff(a.params.weights[0].value, b.params.weights[0].value) > 0.0);
  }
}

TEST_CASE("constant generators make the main net independent of z") {
  Rng rng(7);
  WgnModel model(wgn_config(ActivationKind::ISLU1b), rng);
  auto zero_first = [](std::vector<Mlp>& gens) {
    for (Mlp& g : gens) g.params.weights.front().value.fill(0.0);
  };
  zero_first(model.params().weight_generators);
  zero_first(model.params().bias_generators);
  zero_first(model.params().beta_generators);
  const Tensor3 x = random_tensor({1, 5, 3}, rng);
  const Tensor3 y1 = predict(model, Tensor3({1, 1, 3}, std::vector<double>{0.1, 0.5, 0.9}), x);
  const Tensor3 y2 = predict(model, Tensor3({1, 1, 3}, std::vector<double>{0.8, 0.0, 0.3}), x);
  CHECK(max_abs_diff(y1, y2) == 0.0);
}

TEST_CASE("WGN gradients reach every generator") {
  Rng rng(8);
  WgnConfig cfg = wgn_config(ActivationKind::ISLU1b);
  cfg.main = main_net(3, 4);
  cfg.generator.width = 6;
  WgnModel model(cfg, rng);
  perturb_params(model, rng);
  const Tensor3 z = random_tensor({2, 1, 3}, rng, 0.0, 1.0);
  const Tensor3 x = random_tensor({2, 4, 3}, rng, 0.0, 1.0);
  const Tensor3 y = random_tensor({2, 4, 1}, rng);
  CHECK(grad_check([&](Tape& t) { return mse(model.forward(t, t.constant(z), t.constant(x)), t.constant(y)); },
                   model.parameters(), 1e-5) < 1e-6);
}

TEST_CASE("WGN with shared biases and betas") {
  Rng rng(9);
  WgnConfig cfg = wgn_config(ActivationKind::ISLU1b);
  cfg.generate_biases = false;
  cfg.generate_activation = false;
  WgnModel model(cfg, rng);
  CHECK(model.params().bias_generators.empty());
  CHECK(model.params().beta_generators.empty());
  CHECK(model.params().shared_biases.size() == 4);
  CHECK(model.params().shared_betas.size() == 3);
  std::size_t scalars = 0;
  for (const Param* p : model.parameters()) scalars += p->value.size();
  CHECK(scalars == count_params(cfg).trainable);
}

TEST_CASE("ConcatGen: widths, zero generators and meta-batch consistency") {
  Rng rng(10);
  ConcatGenConfig cfg;
  cfg.main = main_net(4, 16, ActivationKind::ISLU0);
  cfg.meta_dim = 3;
  CHECK(cfg.layer_input_widths() == std::vector<std::size_t>{11, 24, 24, 24});
  ConcatGenModel model(cfg, rng);
  perturb_params(model, rng);
  const Tensor3 z = random_tensor({3, 1, 3}, rng, 0.0, 1.0);
  const Tensor3 x = random_tensor({3, 5, 3}, rng, 0.0, 1.0);
  const Tensor3 batched = predict(model, z, x);
  for (std::size_t m = 0; m < 3; ++m) {
    CHECK(max_abs_diff(predict(model, row_of(z, m), row_of(x, m)), row_of(batched, m)) < 1e-10);
  }

  // Zeroed generator outputs: an MLP whose extra 8 inputs are 0.
  for (Mlp& g : model.params().generators) {
    g.params.weights.back().value.fill(0.0);
    g.params.biases.back().value.fill(0.0);
  }
  Mlp plain{cfg.main, {}};
  for (std::size_t l = 0; l < 4; ++l) {
    const Tensor3& W = model.params().main.weights[l].value;
    const std::size_t in = cfg.main.layer_sizes[l], out = cfg.main.layer_sizes[l + 1];
    Tensor3 w({1, in, out});
    for (std::size_t i = 0; i < in; ++i)
      for (std::size_t j = 0; j < out; ++j) w(0, i, j) = W(0, i, j);
    plain.params.weights.emplace_back("w", w);
    plain.params.biases.push_back(model.params().main.biases[l]);
  }
  CHECK(max_abs_diff(predict(model, row_of(z, 0), row_of(x, 0)), mlp_predict(plain, row_of(x, 0))) < 1e-12);
  CHECK(count_params(cfg).main == (11 * 16 + 16) + (24 * 16 + 16) + (24 * 16 + 16) + (24 * 1 + 1));
}

TEST_CASE("MlpModel with metaparameters appends z to every row") {
  Rng rng(11);
  MlpModel model(main_net(3, 5, ActivationKind::ISLU0, 4), 1, rng);
  CHECK(model.input_dim() == 3);
  CHECK(model.meta_dim() == 1);
  const Tensor3 x = random_tensor({2, 4, 3}, rng);
  const Tensor3 z({2, 1, 1}, std::vector<double>{0.3, -0.2});
  const Tensor3 y = predict(model, z, x);
  for (std::size_t m = 0; m < 2; ++m) {
    Tensor3 joined({1, 4, 4});
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 3; ++c) joined(0, r, c) = x(m, r, c);
      joined(0, r, 3) = z(m, 0, 0);
    }
    CHECK(max_abs_diff(mlp_predict(model.mlp(), joined), row_of(y, m)) < 1e-14);
  }
  CHECK_THROWS(MlpModel(main_net(3, 5, ActivationKind::ISLU0, 2), 2, rng));
}
