#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nff/activations.hpp"
#include "nff/random.hpp"
#include "nff/tape.hpp"

namespace nff {

/// Node counts [N_in, h_1, ..., N_out]; hidden layers use `activation`, the
/// output layer is affine.
struct MlpConfig {
  std::vector<std::size_t> layer_sizes;
  ActivationSpec activation;

  /// "(pL,qN)": p-1 hidden layers of width q, p+1 layers in total.
  static MlpConfig from_pl_qn(std::size_t p, std::size_t q, std::size_t n_in, std::size_t n_out,
                              ActivationSpec activation);

  std::size_t weight_layers() const { return layer_sizes.empty() ? 0 : layer_sizes.size() - 1; }
  std::size_t hidden_layers() const { return weight_layers() == 0 ? 0 : weight_layers() - 1; }
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  /// "(4L,16N)" for a main net with 3 hidden layers of 16 nodes.
  std::string tag() const;
  void validate() const;
};

/// Per-layer weights (1,n_l,n_{l+1}), biases (1,1,n_{l+1}) and, when the
/// activation is trainable, one raw beta (1,1,1) per hidden layer.
struct MlpParams {
  std::vector<Param> weights;
  std::vector<Param> biases;
  std::vector<Param> betas;

  std::vector<Param*> all();
  std::vector<const Param*> all() const;
};

struct Mlp {
  MlpConfig config;
  MlpParams params;
};

/// uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases,
/// betas at the activation's initial raw value.
MlpParams init_mlp_params(const MlpConfig& cfg, Rng& rng, const std::string& prefix = "");
Mlp make_mlp(const MlpConfig& cfg, Rng& rng, const std::string& prefix = "");

/// Affine+activation stack over x of shape (MB,TB,N_in).
Var mlp_forward(Tape& tape, const MlpConfig& cfg, const MlpParams& params, Var x);
/// Tape-free convenience wrapper; evaluates large inputs in row chunks.
Tensor3 mlp_predict(const Mlp& mlp, const Tensor3& x);

/// Output of every layer (hidden layers after activation, then the output
/// layer) for x of shape (1,N,N_in); element i has shape (1,N,width_i).
std::vector<Tensor3> dump_layer_outputs(const Mlp& mlp, const Tensor3& x);
/// One-dimensional convenience form over a grid of scalar inputs.
std::vector<Tensor3> dump_layer_outputs(const Mlp& mlp, std::span<const double> x_grid);

/// Weight-generator layout shared by WGN and ConcatGen: `hidden_layers`
/// layers of `width` nodes with a fixed activation.
struct GeneratorShape {
  std::size_t hidden_layers = 2;
  std::size_t width = 40;
  ActivationKind activation = ActivationKind::Swish;
};

struct WgnConfig {
  MlpConfig main;
  std::size_t meta_dim = 0;
  GeneratorShape generator;
  bool generate_biases = true;
  /// Only meaningful for trainable-beta activations.
  bool generate_activation = true;

  bool generates_betas() const { return main.activation.beta_trainable && generate_activation; }
  MlpConfig generator_config(std::size_t out_dim) const;
  void validate() const;
};

/// One independent generator per generated main-net block. Blocks that are
/// not generated are shared parameters.
struct WgnParams {
  std::vector<Mlp> weight_generators;
  std::vector<Mlp> bias_generators;
  std::vector<Mlp> beta_generators;
  std::vector<Param> shared_biases;
  std::vector<Param> shared_betas;

  std::vector<Param*> all();
  std::vector<const Param*> all() const;
};

WgnParams init_wgn_params(const WgnConfig& cfg, Rng& rng);

/// z (MB,1,N[z]), x (MB,TB,N_in) -> (MB,TB,N_out). Each generator maps the
/// MB metaparameter rows to flat blocks that are reshaped per task.
Var wgn_forward(Tape& tape, const WgnConfig& cfg, const WgnParams& params, Var z, Var x);

/// Materializes the compact main network for one metaparameter vector.
Mlp extract_nf(const WgnConfig& cfg, const WgnParams& params, std::span<const double> z);

/// Main net whose layer inputs are each extended by a generated vector.
struct ConcatGenConfig {
  MlpConfig main;  // nominal widths; layer l actually takes width_l + gen_out_dim inputs
  std::size_t meta_dim = 0;
  std::size_t gen_out_dim = 8;
  GeneratorShape generator;

  /// Main-net config with widened layer inputs, used to shape the weights.
  std::vector<std::size_t> layer_input_widths() const;
  MlpConfig generator_config() const;
  void validate() const;
};

struct ConcatGenParams {
  MlpParams main;
  std::vector<Mlp> generators;

  std::vector<Param*> all();
  std::vector<const Param*> all() const;
};

ConcatGenParams init_concat_gen_params(const ConcatGenConfig& cfg, Rng& rng);
Var concat_gen_forward(Tape& tape, const ConcatGenConfig& cfg, const ConcatGenParams& params, Var z,
                       Var x);

/// `main` is the size of the compact main network (what extract_nf
/// yields for WGN); `trainable` counts the scalars the optimizer updates.
struct ParamCount {
  std::size_t main = 0;
  std::size_t generators = 0;
  std::size_t trainable = 0;
};

ParamCount count_params(const MlpConfig& cfg);
ParamCount count_params(const WgnConfig& cfg);
ParamCount count_params(const ConcatGenConfig& cfg);

enum class ModelKind { MLP, WGN, ConcatGen };
std::string_view model_kind_name(ModelKind kind);

/// Common surface for training and evaluation. `z` is (MB,1,meta_dim) and
/// is ignored by models with meta_dim() == 0.
class Model {
 public:
  virtual ~Model() = default;

  virtual ModelKind kind() const = 0;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t meta_dim() const = 0;
  virtual std::size_t output_dim() const = 0;

  virtual std::vector<Param*> parameters() = 0;
  virtual std::vector<const Param*> parameters() const = 0;
  virtual Var forward(Tape& tape, Var z, Var x) const = 0;
  virtual ParamCount param_count() const = 0;
  virtual std::unique_ptr<Model> clone() const = 0;
};

/// Plain MLP; with meta_dim > 0 the metaparameters are appended to every
/// input row (fMLP / mMLP style).
class MlpModel final : public Model {
 public:
  MlpModel(MlpConfig cfg, std::size_t meta_dim, Rng& rng);
  MlpModel(Mlp mlp, std::size_t meta_dim);

  ModelKind kind() const override { return ModelKind::MLP; }
  std::size_t input_dim() const override { return mlp_.config.input_dim() - meta_dim_; }
  std::size_t meta_dim() const override { return meta_dim_; }
  std::size_t output_dim() const override { return mlp_.config.output_dim(); }
  std::vector<Param*> parameters() override { return mlp_.params.all(); }
  std::vector<const Param*> parameters() const override { return mlp_.params.all(); }
  Var forward(Tape& tape, Var z, Var x) const override;
  ParamCount param_count() const override { return count_params(mlp_.config); }
  std::unique_ptr<Model> clone() const override { return std::make_unique<MlpModel>(*this); }

  const Mlp& mlp() const { return mlp_; }

 private:
  Mlp mlp_;
  std::size_t meta_dim_ = 0;
};

class WgnModel final : public Model {
 public:
  WgnModel(WgnConfig cfg, Rng& rng);
  WgnModel(WgnConfig cfg, WgnParams params);

  ModelKind kind() const override { return ModelKind::WGN; }
  std::size_t input_dim() const override { return cfg_.main.input_dim(); }
  std::size_t meta_dim() const override { return cfg_.meta_dim; }
  std::size_t output_dim() const override { return cfg_.main.output_dim(); }
  std::vector<Param*> parameters() override { return params_.all(); }
  std::vector<const Param*> parameters() const override { return params_.all(); }
  Var forward(Tape& tape, Var z, Var x) const override;
  ParamCount param_count() const override { return count_params(cfg_); }
  std::unique_ptr<Model> clone() const override { return std::make_unique<WgnModel>(*this); }

  const WgnConfig& config() const { return cfg_; }
  const WgnParams& params() const { return params_; }
  WgnParams& params() { return params_; }
  Mlp extract(std::span<const double> z) const { return extract_nf(cfg_, params_, z); }

 private:
  WgnConfig cfg_;
  WgnParams params_;
};

class ConcatGenModel final : public Model {
 public:
  ConcatGenModel(ConcatGenConfig cfg, Rng& rng);
  ConcatGenModel(ConcatGenConfig cfg, ConcatGenParams params);

  ModelKind kind() const override { return ModelKind::ConcatGen; }
  std::size_t input_dim() const override { return cfg_.main.input_dim(); }
  std::size_t meta_dim() const override { return cfg_.meta_dim; }
  std::size_t output_dim() const override { return cfg_.main.output_dim(); }
  std::vector<Param*> parameters() override { return params_.all(); }
  std::vector<const Param*> parameters() const override { return params_.all(); }
  Var forward(Tape& tape, Var z, Var x) const override;
  ParamCount param_count() const override { return count_params(cfg_); }
  std::unique_ptr<Model> clone() const override { return std::make_unique<ConcatGenModel>(*this); }

  const ConcatGenConfig& config() const { return cfg_; }
  const ConcatGenParams& params() const { return params_; }
  ConcatGenParams& params() { return params_; }

 private:
  ConcatGenConfig cfg_;
  ConcatGenParams params_;
};

/// Evaluates `model` without keeping gradients; x (MB,TB,d_x), z (MB,1,N[z])
/// (ignored when meta_dim() == 0). Large TB is processed in chunks.
Tensor3 predict(const Model& model, const Tensor3& z, const Tensor3& x);

}  // namespace nff
