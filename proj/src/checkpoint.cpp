#include "nff/checkpoint.hpp"

#include <fstream>
#include <map>
#include <set>

#include "nff/error.hpp"

namespace nff {

using nlohmann::json;

namespace {

std::string_view parameterization_name(BetaParameterization p) {
  return p == BetaParameterization::Direct ? "direct" : "one_plus_var";
}

BetaParameterization parse_parameterization(const std::string& s) {
  if (s == "direct") return BetaParameterization::Direct;
  if (s == "one_plus_var") return BetaParameterization::OnePlusVar;
  throw ConfigError("unknown beta_parameterization '" + s + "' (valid: direct, one_plus_var)");
}

json generator_json(const GeneratorShape& g) {
  return {{"hidden_layers", g.hidden_layers}, {"width", g.width}, {"activation", activation_name(g.activation)}};
}

GeneratorShape generator_from_json(const json& j) {
  GeneratorShape g;
  g.hidden_layers = j.value("hidden_layers", g.hidden_layers);
  g.width = j.value("width", g.width);
  if (j.contains("activation")) g.activation = parse_activation(j.at("activation").get<std::string>());
  return g;
}

ModelKind parse_model_kind(const std::string& s) {
  for (ModelKind k : {ModelKind::MLP, ModelKind::WGN, ModelKind::ConcatGen}) {
    if (model_kind_name(k) == s) return k;
  }
  throw DataError("unknown model_kind '" + s + "'");
}

json model_config_json(const Model& model) {
  switch (model.kind()) {
    case ModelKind::MLP: {
      const auto& m = static_cast<const MlpModel&>(model);
      json j = to_json(m.mlp().config);
      j["meta_dim"] = m.meta_dim();
      return j;
    }
    case ModelKind::WGN: return to_json(static_cast<const WgnModel&>(model).config());
    case ModelKind::ConcatGen: return to_json(static_cast<const ConcatGenModel&>(model).config());
  }
  throw ContractError("unhandled model kind");
}

std::unique_ptr<Model> build_model(ModelKind kind, const json& cfg) {
  Rng rng(0);
  switch (kind) {
    case ModelKind::MLP:
      return std::make_unique<MlpModel>(mlp_config_from_json(cfg), cfg.value("meta_dim", std::size_t{0}), rng);
    case ModelKind::WGN: return std::make_unique<WgnModel>(wgn_config_from_json(cfg), rng);
    case ModelKind::ConcatGen: return std::make_unique<ConcatGenModel>(concat_gen_config_from_json(cfg), rng);
  }
  throw ContractError("unhandled model kind");
}

}  // namespace

json to_json(const ActivationSpec& spec) {
  return {{"kind", activation_name(spec.kind)},
          {"alpha", spec.alpha},
          {"beta_init", spec.beta_init},
          {"beta_trainable", spec.beta_trainable},
          {"beta_parameterization", parameterization_name(spec.beta_parameterization)}};
}

ActivationSpec activation_from_json(const json& j) {
  if (j.is_string()) return ActivationSpec::of(parse_activation(j.get<std::string>()));
  ActivationSpec s = ActivationSpec::of(parse_activation(j.at("kind").get<std::string>()));
  s.alpha = j.value("alpha", s.alpha);
  s.beta_init = j.value("beta_init", s.beta_init);
  s.beta_trainable = j.value("beta_trainable", s.beta_trainable);
  if (j.contains("beta_parameterization")) {
    s.beta_parameterization = parse_parameterization(j.at("beta_parameterization").get<std::string>());
  }
  s.validate();
  return s;
}

json to_json(const MlpConfig& cfg) {
  return {{"layer_sizes", cfg.layer_sizes}, {"activation", to_json(cfg.activation)}};
}

MlpConfig mlp_config_from_json(const json& j) {
  MlpConfig cfg;
  cfg.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
  cfg.activation = activation_from_json(j.at("activation"));
  cfg.validate();
  return cfg;
}

json to_json(const WgnConfig& cfg) {
  return {{"main", to_json(cfg.main)},
          {"meta_dim", cfg.meta_dim},
          {"generator", generator_json(cfg.generator)},
          {"generate_biases", cfg.generate_biases},
          {"generate_activation", cfg.generate_activation}};
}

WgnConfig wgn_config_from_json(const json& j) {
  WgnConfig cfg;
  cfg.main = mlp_config_from_json(j.at("main"));
  cfg.meta_dim = j.at("meta_dim").get<std::size_t>();
  if (j.contains("generator")) cfg.generator = generator_from_json(j.at("generator"));
  cfg.generate_biases = j.value("generate_biases", cfg.generate_biases);
  cfg.generate_activation = j.value("generate_activation", cfg.generate_activation);
  cfg.validate();
  return cfg;
}

json to_json(const ConcatGenConfig& cfg) {
  return {{"main", to_json(cfg.main)},
          {"meta_dim", cfg.meta_dim},
          {"gen_out_dim", cfg.gen_out_dim},
          {"generator", generator_json(cfg.generator)}};
}

ConcatGenConfig concat_gen_config_from_json(const json& j) {
  ConcatGenConfig cfg;
  cfg.main = mlp_config_from_json(j.at("main"));
  cfg.meta_dim = j.at("meta_dim").get<std::size_t>();
  cfg.gen_out_dim = j.value("gen_out_dim", cfg.gen_out_dim);
  if (j.contains("generator")) cfg.generator = generator_from_json(j.at("generator"));
  cfg.validate();
  return cfg;
}

json checkpoint_json(const Model& model, const json& run) {
  json params = json::array();
  for (const Param* p : model.parameters()) {
    assert_finite(p->value, "checkpoint parameter " + p->name);
    const Shape& s = p->value.shape();
    params.push_back({{"name", p->name},
                      {"shape", {s.d0, s.d1, s.d2}},
                      {"trainable", p->trainable},
                      {"data", p->value.vec()}});
  }
  return {{"format_version", kCheckpointFormatVersion},
          {"model_kind", model_kind_name(model.kind())},
          {"config", model_config_json(model)},
          {"params", std::move(params)},
          {"run", run}};
}

LoadedCheckpoint model_from_checkpoint(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw DataError("unsupported checkpoint format_version " + std::to_string(version));
    }
    auto model = build_model(parse_model_kind(j.at("model_kind").get<std::string>()), j.at("config"));

    std::map<std::string, const json*> stored;
    for (const json& p : j.at("params")) {
      const auto name = p.at("name").get<std::string>();
      if (!stored.emplace(name, &p).second) throw DataError("duplicate checkpoint parameter '" + name + "'");
    }
    std::set<std::string> used;
    for (Param* p : model->parameters()) {
      const auto it = stored.find(p->name);
      if (it == stored.end()) throw DataError("checkpoint is missing parameter '" + p->name + "'");
      const json& e = *it->second;
      const auto dims = e.at("shape").get<std::vector<std::size_t>>();
      if (dims.size() != 3 || Shape{dims[0], dims[1], dims[2]} != p->value.shape()) {
        throw DataError("checkpoint parameter '" + p->name + "' has shape " + e.at("shape").dump() +
                        ", model expects " + p->value.shape().str());
      }
      p->value = Tensor3(p->value.shape(), e.at("data").get<std::vector<double>>());
      p->trainable = e.value("trainable", p->trainable);
      p->zero_grad();
      used.insert(p->name);
    }
    for (const auto& [name, _] : stored) {
      if (!used.contains(name)) throw DataError("checkpoint has unexpected parameter '" + name + "'");
    }
    return {std::move(model), j.value("run", json::object())};
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const DimensionError& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const json& run) {
  write_json_file(path, checkpoint_json(model, run));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  try {
    return model_from_checkpoint(read_json_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace nff
