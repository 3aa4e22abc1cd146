#include "nff/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nff/error.hpp"

namespace nff {

MlpConfig MlpConfig::from_pl_qn(std::size_t p, std::size_t q, std::size_t n_in, std::size_t n_out,
                                ActivationSpec activation) {
  if (p < 1) throw ParameterError("(pL,qN) requires p >= 1");
  MlpConfig cfg;
  cfg.layer_sizes.push_back(n_in);
  for (std::size_t i = 0; i + 1 < p; ++i) cfg.layer_sizes.push_back(q);
  cfg.layer_sizes.push_back(n_out);
  cfg.activation = activation;
  return cfg;
}

std::string MlpConfig::tag() const {
  std::ostringstream os;
  const std::size_t width = hidden_layers() > 0 ? layer_sizes[1] : 0;
  os << '(' << hidden_layers() + 1 << "L," << width << "N)";
  return os.str();
}

void MlpConfig::validate() const {
  if (layer_sizes.size() < 2) throw ParameterError("an MLP needs at least input and output layers");
  for (std::size_t n : layer_sizes) {
    if (n == 0) throw ParameterError("MLP layer sizes must be positive");
  }
  activation.validate();
}

std::vector<Param*> MlpParams::all() {
  std::vector<Param*> out;
  for (auto& p : weights) out.push_back(&p);
  for (auto& p : biases) out.push_back(&p);
  for (auto& p : betas) out.push_back(&p);
  return out;
}

std::vector<const Param*> MlpParams::all() const {
  std::vector<const Param*> out;
  for (const auto& p : weights) out.push_back(&p);
  for (const auto& p : biases) out.push_back(&p);
  for (const auto& p : betas) out.push_back(&p);
  return out;
}

MlpParams init_mlp_params(const MlpConfig& cfg, Rng& rng, const std::string& prefix) {
  cfg.validate();
  MlpParams params;
  const std::size_t layers = cfg.weight_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_in = cfg.layer_sizes[l], fan_out = cfg.layer_sizes[l + 1];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor3 w({1, fan_in, fan_out});
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    params.weights.emplace_back(prefix + "W" + std::to_string(l), std::move(w));
    params.biases.emplace_back(prefix + "b" + std::to_string(l), Tensor3({1, 1, fan_out}));
  }
  if (cfg.activation.beta_trainable) {
    for (std::size_t l = 0; l < cfg.hidden_layers(); ++l) {
      params.betas.emplace_back(prefix + "beta" + std::to_string(l),
                                Tensor3::scalar(cfg.activation.initial_raw_beta()));
    }
  }
  return params;
}

Mlp make_mlp(const MlpConfig& cfg, Rng& rng, const std::string& prefix) {
  return Mlp{cfg, init_mlp_params(cfg, rng, prefix)};
}

namespace {

void check_input_width(const Var& x, std::size_t expected, const char* what) {
  if (x.shape().d2 != expected) {
    std::ostringstream os;
    os << what << ": input " << x.shape().str() << " does not match input width " << expected;
    throw DimensionError(os.str());
  }
}

Var beta_leaf(Tape& tape, const MlpParams& params, std::size_t l) {
  return tape.leaf(params.betas.at(l));
}

}  // namespace

Var mlp_forward(Tape& tape, const MlpConfig& cfg, const MlpParams& params, Var x) {
  check_input_width(x, cfg.input_dim(), "mlp_forward");
  const std::size_t layers = cfg.weight_layers();
  if (params.weights.size() != layers || params.biases.size() != layers) {
    throw DimensionError("mlp_forward: parameter block count does not match config");
  }
  Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    h = matmul_batched(h, tape.leaf(params.weights[l]));
    h = add(h, tape.leaf(params.biases[l]));
    if (l + 1 < layers) {
      h = cfg.activation.beta_trainable ? apply(cfg.activation, h, beta_leaf(tape, params, l))
                                        : apply(cfg.activation, h);
    }
  }
  return h;
}

namespace {

constexpr std::size_t kPredictChunk = 8192;

// Runs `f` over row chunks of x (MB,TB,d) along TB and stitches the outputs.
template <class F>
Tensor3 chunked(const Tensor3& x, std::size_t out_dim, F&& f) {
  const Shape s = x.shape();
  if (s.d1 <= kPredictChunk) return f(x);
  Tensor3 out({s.d0, s.d1, out_dim});
  for (std::size_t start = 0; start < s.d1; start += kPredictChunk) {
    const std::size_t n = std::min(kPredictChunk, s.d1 - start);
    Tensor3 part({s.d0, n, s.d2});
    for (std::size_t m = 0; m < s.d0; ++m) {
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t k = 0; k < s.d2; ++k) part(m, t, k) = x(m, start + t, k);
      }
    }
    const Tensor3 y = f(part);
    for (std::size_t m = 0; m < s.d0; ++m) {
      for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t k = 0; k < out_dim; ++k) out(m, start + t, k) = y(m, t, k);
      }
    }
  }
  return out;
}

}  // namespace

Tensor3 mlp_predict(const Mlp& mlp, const Tensor3& x) {
  return chunked(x, mlp.config.output_dim(), [&](const Tensor3& part) {
    Tape tape;
    return mlp_forward(tape, mlp.config, mlp.params, tape.constant(part)).value();
  });
}

std::vector<Tensor3> dump_layer_outputs(const Mlp& mlp, const Tensor3& x) {
  const MlpConfig& cfg = mlp.config;
  Tape tape;
  Var h = tape.constant(x);
  check_input_width(h, cfg.input_dim(), "dump_layer_outputs");
  std::vector<Tensor3> out;
  const std::size_t layers = cfg.weight_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    h = add(matmul_batched(h, tape.leaf(mlp.params.weights[l])), tape.leaf(mlp.params.biases[l]));
    if (l + 1 < layers) {
      h = cfg.activation.beta_trainable ? apply(cfg.activation, h, beta_leaf(tape, mlp.params, l))
                                        : apply(cfg.activation, h);
    }
    out.push_back(h.value());
  }
  return out;
}

std::vector<Tensor3> dump_layer_outputs(const Mlp& mlp, std::span<const double> x_grid) {
  if (mlp.config.input_dim() != 1) {
    throw DimensionError("dump_layer_outputs: a scalar grid needs a 1-input network");
  }
  return dump_layer_outputs(mlp, Tensor3({1, x_grid.size(), 1},
                                         std::vector<double>(x_grid.begin(), x_grid.end())));
}

// ---------------------------------------------------------------------------
// WGN

MlpConfig WgnConfig::generator_config(std::size_t out_dim) const {
  MlpConfig g;
  g.layer_sizes.push_back(meta_dim);
  for (std::size_t i = 0; i < generator.hidden_layers; ++i) g.layer_sizes.push_back(generator.width);
  g.layer_sizes.push_back(out_dim);
  g.activation = ActivationSpec::of(generator.activation);
  g.activation.beta_trainable = false;
  return g;
}

void WgnConfig::validate() const {
  main.validate();
  if (meta_dim == 0) throw ParameterError("WGN needs at least one metaparameter");
  if (generator.width == 0) throw ParameterError("generator width must be positive");
}

std::vector<Param*> WgnParams::all() {
  std::vector<Param*> out;
  for (auto* group : {&weight_generators, &bias_generators, &beta_generators}) {
    for (auto& g : *group) {
      const auto ps = g.params.all();
      out.insert(out.end(), ps.begin(), ps.end());
    }
  }
  for (auto& p : shared_biases) out.push_back(&p);
  for (auto& p : shared_betas) out.push_back(&p);
  return out;
}

std::vector<const Param*> WgnParams::all() const {
  std::vector<const Param*> out;
  for (const auto* group : {&weight_generators, &bias_generators, &beta_generators}) {
    for (const auto& g : *group) {
      const auto ps = g.params.all();
      out.insert(out.end(), ps.begin(), ps.end());
    }
  }
  for (const auto& p : shared_biases) out.push_back(&p);
  for (const auto& p : shared_betas) out.push_back(&p);
  return out;
}

WgnParams init_wgn_params(const WgnConfig& cfg, Rng& rng) {
  cfg.validate();
  WgnParams params;
  const auto& sizes = cfg.main.layer_sizes;
  const std::size_t layers = cfg.main.weight_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string ls = std::to_string(l);
    params.weight_generators.push_back(
        make_mlp(cfg.generator_config(sizes[l] * sizes[l + 1]), rng, "gen.W" + ls + "."));
    if (cfg.generate_biases) {
      params.bias_generators.push_back(make_mlp(cfg.generator_config(sizes[l + 1]), rng, "gen.b" + ls + "."));
    } else {
      params.shared_biases.emplace_back("main.b" + ls, Tensor3({1, 1, sizes[l + 1]}));
    }
  }
  if (cfg.main.activation.beta_trainable) {
    const double raw = cfg.main.activation.initial_raw_beta();
    for (std::size_t l = 0; l < cfg.main.hidden_layers(); ++l) {
      const std::string ls = std::to_string(l);
      if (cfg.generate_activation) {
        Mlp g = make_mlp(cfg.generator_config(1), rng, "gen.beta" + ls + ".");
        // Every task starts at the canonical shape; dependence on z is learned.
        g.params.weights.back().value.fill(0.0);
        g.params.biases.back().value.fill(raw);
        params.beta_generators.push_back(std::move(g));
      } else {
        params.shared_betas.emplace_back("main.beta" + ls, Tensor3::scalar(raw));
      }
    }
  }
  return params;
}

namespace {

// Generator output for the MB rows of z, reshaped to (MB, rows, cols).
Var generate(Tape& tape, const Mlp& gen, Var z_rows, std::size_t mb, std::size_t rows, std::size_t cols) {
  Var flat = mlp_forward(tape, gen.config, gen.params, z_rows);
  if (flat.shape().d2 != rows * cols) {
    throw DimensionError("generator emits " + std::to_string(flat.shape().d2) +
                         " values but the target block needs " + std::to_string(rows * cols));
  }
  return reshape(flat, {mb, rows, cols});
}

Var meta_rows(Var z, std::size_t meta_dim, const char* what) {
  const Shape s = z.shape();
  if (s.d1 != 1 || s.d2 != meta_dim) {
    std::ostringstream os;
    os << what << ": metaparameters must be (MB,1," << meta_dim << "), got " << s.str();
    throw DimensionError(os.str());
  }
  return reshape(z, {1, s.d0, s.d2});
}

void check_meta_batch(Var z, Var x, const char* what) {
  if (z.shape().d0 != x.shape().d0) {
    throw DimensionError(std::string(what) + ": z " + z.shape().str() + " and x " + x.shape().str() +
                         " disagree on MB");
  }
}

}  // namespace

Var wgn_forward(Tape& tape, const WgnConfig& cfg, const WgnParams& params, Var z, Var x) {
  check_meta_batch(z, x, "wgn_forward");
  check_input_width(x, cfg.main.input_dim(), "wgn_forward");
  const std::size_t mb = z.shape().d0;
  Var zr = meta_rows(z, cfg.meta_dim, "wgn_forward");
  const auto& sizes = cfg.main.layer_sizes;
  const std::size_t layers = cfg.main.weight_layers();
  Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Var w = generate(tape, params.weight_generators[l], zr, mb, sizes[l], sizes[l + 1]);
    h = matmul_batched(h, w);
    Var b = cfg.generate_biases ? generate(tape, params.bias_generators[l], zr, mb, 1, sizes[l + 1])
                                : tape.leaf(params.shared_biases[l]);
    h = add(h, b);
    if (l + 1 < layers) {
      if (cfg.main.activation.beta_trainable) {
        Var beta = cfg.generate_activation ? generate(tape, params.beta_generators[l], zr, mb, 1, 1)
                                           : tape.leaf(params.shared_betas[l]);
        h = apply(cfg.main.activation, h, beta);
      } else {
        h = apply(cfg.main.activation, h);
      }
    }
  }
  return h;
}

Mlp extract_nf(const WgnConfig& cfg, const WgnParams& params, std::span<const double> z) {
  if (z.size() != cfg.meta_dim) {
    throw DimensionError("extract_nf: expected " + std::to_string(cfg.meta_dim) +
                         " metaparameters, got " + std::to_string(z.size()));
  }
  Tape tape;
  Var zr = tape.constant(Tensor3({1, 1, z.size()}, std::vector<double>(z.begin(), z.end())));
  const auto& sizes = cfg.main.layer_sizes;
  const std::size_t layers = cfg.main.weight_layers();
  Mlp nf;
  nf.config = cfg.main;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string ls = std::to_string(l);
    nf.params.weights.emplace_back("W" + ls,
                                   generate(tape, params.weight_generators[l], zr, 1, sizes[l], sizes[l + 1]).value());
    Tensor3 b = cfg.generate_biases ? generate(tape, params.bias_generators[l], zr, 1, 1, sizes[l + 1]).value()
                                    : params.shared_biases[l].value;
    nf.params.biases.emplace_back("b" + ls, std::move(b));
  }
  if (cfg.main.activation.beta_trainable) {
    for (std::size_t l = 0; l < cfg.main.hidden_layers(); ++l) {
      Tensor3 beta = cfg.generate_activation ? generate(tape, params.beta_generators[l], zr, 1, 1, 1).value()
                                             : params.shared_betas[l].value;
      nf.params.betas.emplace_back("beta" + std::to_string(l), std::move(beta));
    }
  }
  return nf;
}

// ---------------------------------------------------------------------------
// ConcatGen

std::vector<std::size_t> ConcatGenConfig::layer_input_widths() const {
  std::vector<std::size_t> w;
  for (std::size_t l = 0; l < main.weight_layers(); ++l) w.push_back(main.layer_sizes[l] + gen_out_dim);
  return w;
}

MlpConfig ConcatGenConfig::generator_config() const {
  MlpConfig g;
  g.layer_sizes.push_back(meta_dim);
  for (std::size_t i = 0; i < generator.hidden_layers; ++i) g.layer_sizes.push_back(generator.width);
  g.layer_sizes.push_back(gen_out_dim);
  g.activation = ActivationSpec::of(generator.activation);
  g.activation.beta_trainable = false;
  return g;
}

void ConcatGenConfig::validate() const {
  main.validate();
  if (meta_dim == 0) throw ParameterError("ConcatGen needs at least one metaparameter");
  if (gen_out_dim == 0) throw ParameterError("ConcatGen generated width must be positive");
}

std::vector<Param*> ConcatGenParams::all() {
  std::vector<Param*> out = main.all();
  for (auto& g : generators) {
    const auto ps = g.params.all();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

std::vector<const Param*> ConcatGenParams::all() const {
  std::vector<const Param*> out = main.all();
  for (const auto& g : generators) {
    const auto ps = g.params.all();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

ConcatGenParams init_concat_gen_params(const ConcatGenConfig& cfg, Rng& rng) {
  cfg.validate();
  ConcatGenParams params;
  const auto widths = cfg.layer_input_widths();
  for (std::size_t l = 0; l < widths.size(); ++l) {
    const std::size_t fan_in = widths[l], fan_out = cfg.main.layer_sizes[l + 1];
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    Tensor3 w({1, fan_in, fan_out});
    for (double& v : w.data()) v = rng.uniform(-bound, bound);
    params.main.weights.emplace_back("main.W" + std::to_string(l), std::move(w));
    params.main.biases.emplace_back("main.b" + std::to_string(l), Tensor3({1, 1, fan_out}));
  }
  if (cfg.main.activation.beta_trainable) {
    for (std::size_t l = 0; l < cfg.main.hidden_layers(); ++l) {
      params.main.betas.emplace_back("main.beta" + std::to_string(l),
                                     Tensor3::scalar(cfg.main.activation.initial_raw_beta()));
    }
  }
  for (std::size_t l = 0; l < widths.size(); ++l) {
    params.generators.push_back(make_mlp(cfg.generator_config(), rng, "gen.in" + std::to_string(l) + "."));
  }
  return params;
}

Var concat_gen_forward(Tape& tape, const ConcatGenConfig& cfg, const ConcatGenParams& params, Var z,
                       Var x) {
  check_meta_batch(z, x, "concat_gen_forward");
  check_input_width(x, cfg.main.input_dim(), "concat_gen_forward");
  const std::size_t mb = z.shape().d0;
  Var zr = meta_rows(z, cfg.meta_dim, "concat_gen_forward");
  const std::size_t layers = cfg.main.weight_layers();
  Var h = x;
  for (std::size_t l = 0; l < layers; ++l) {
    Var g = generate(tape, params.generators[l], zr, mb, 1, cfg.gen_out_dim);
    h = concat_last(h, g);
    h = add(matmul_batched(h, tape.leaf(params.main.weights[l])), tape.leaf(params.main.biases[l]));
    if (l + 1 < layers) {
      h = cfg.main.activation.beta_trainable ? apply(cfg.main.activation, h, beta_leaf(tape, params.main, l))
                                             : apply(cfg.main.activation, h);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Counting

namespace {

std::size_t dense_count(const std::vector<std::size_t>& sizes) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
  return n;
}

}  // namespace

ParamCount count_params(const MlpConfig& cfg) {
  if (cfg.layer_sizes.size() < 2) return {};
  std::size_t n = dense_count(cfg.layer_sizes);
  if (cfg.activation.beta_trainable) n += cfg.hidden_layers();
  return {n, 0, n};
}

ParamCount count_params(const WgnConfig& cfg) {
  ParamCount c;
  c.main = count_params(cfg.main).main;
  const auto& sizes = cfg.main.layer_sizes;
  std::size_t shared = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    c.generators += count_params(cfg.generator_config(sizes[l] * sizes[l + 1])).main;
    if (cfg.generate_biases) {
      c.generators += count_params(cfg.generator_config(sizes[l + 1])).main;
    } else {
      shared += sizes[l + 1];
    }
  }
  if (cfg.main.activation.beta_trainable) {
    if (cfg.generate_activation) {
      c.generators += cfg.main.hidden_layers() * count_params(cfg.generator_config(1)).main;
    } else {
      shared += cfg.main.hidden_layers();
    }
  }
  c.trainable = c.generators + shared;
  return c;
}

ParamCount count_params(const ConcatGenConfig& cfg) {
  ParamCount c;
  const auto widths = cfg.layer_input_widths();
  for (std::size_t l = 0; l < widths.size(); ++l) {
    c.main += widths[l] * cfg.main.layer_sizes[l + 1] + cfg.main.layer_sizes[l + 1];
    c.generators += count_params(cfg.generator_config()).main;
  }
  if (cfg.main.activation.beta_trainable) c.main += cfg.main.hidden_layers();
  c.trainable = c.main + c.generators;
  return c;
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::MLP: return "MLP";
    case ModelKind::WGN: return "WGN";
    case ModelKind::ConcatGen: return "ConcatGen";
  }
  return "UNKNOWN";
}

// ---------------------------------------------------------------------------
// Model wrappers

MlpModel::MlpModel(MlpConfig cfg, std::size_t meta_dim, Rng& rng)
    : mlp_(make_mlp(cfg, rng)), meta_dim_(meta_dim) {
  if (cfg.input_dim() <= meta_dim) throw ParameterError("MLP input width must exceed the joined meta width");
}

MlpModel::MlpModel(Mlp mlp, std::size_t meta_dim) : mlp_(std::move(mlp)), meta_dim_(meta_dim) {
  mlp_.config.validate();
}

Var MlpModel::forward(Tape& tape, Var z, Var x) const {
  if (meta_dim_ == 0) return mlp_forward(tape, mlp_.config, mlp_.params, x);
  check_meta_batch(z, x, "MLP forward");
  if (z.shape().d1 != 1 || z.shape().d2 != meta_dim_) {
    throw DimensionError("MLP forward: metaparameters " + z.shape().str() + " do not match meta width " +
                         std::to_string(meta_dim_));
  }
  return mlp_forward(tape, mlp_.config, mlp_.params, concat_last(x, z));
}

WgnModel::WgnModel(WgnConfig cfg, Rng& rng) : cfg_(std::move(cfg)), params_(init_wgn_params(cfg_, rng)) {}

WgnModel::WgnModel(WgnConfig cfg, WgnParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
}

Var WgnModel::forward(Tape& tape, Var z, Var x) const { return wgn_forward(tape, cfg_, params_, z, x); }

ConcatGenModel::ConcatGenModel(ConcatGenConfig cfg, Rng& rng)
    : cfg_(std::move(cfg)), params_(init_concat_gen_params(cfg_, rng)) {}

ConcatGenModel::ConcatGenModel(ConcatGenConfig cfg, ConcatGenParams params)
    : cfg_(std::move(cfg)), params_(std::move(params)) {
  cfg_.validate();
}

Var ConcatGenModel::forward(Tape& tape, Var z, Var x) const {
  return concat_gen_forward(tape, cfg_, params_, z, x);
}

Tensor3 predict(const Model& model, const Tensor3& z, const Tensor3& x) {
  if (model.meta_dim() > 0 && z.shape() != Shape{x.shape().d0, 1, model.meta_dim()}) {
    throw DimensionError("predict: metaparameters " + z.shape().str() + " do not match x " + x.shape().str());
  }
  return chunked(x, model.output_dim(), [&](const Tensor3& part) {
    Tape tape;
    Var zv = tape.constant(model.meta_dim() > 0 ? z : Tensor3({part.shape().d0, 1, 0}));
    return model.forward(tape, zv, tape.constant(part)).value();
  });
}

}  // namespace nff
