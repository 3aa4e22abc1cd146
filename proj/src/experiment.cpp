#include "nff/experiment.hpp"

#include <algorithm>
#include <cctype>

#include "nff/checkpoint.hpp"
#include "nff/dataset_io.hpp"
#include "nff/error.hpp"

namespace nff {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_grid(DatasetKind k) { return k == DatasetKind::DS1 || k == DatasetKind::DS2 || k == DatasetKind::DS3; }

bool single_task_family(const ExperimentConfig& cfg) {
  return is_grid(cfg.dataset.kind) &&
         (cfg.model.family == ModelFamily::MLP || cfg.model.family == ModelFamily::fMLP);
}

bool pooled_family(ModelFamily f) {
  return f == ModelFamily::MLP || f == ModelFamily::fMLP || f == ModelFamily::mMLP;
}

std::string_view perturb_mode_name(PerturbMode m) { return m == PerturbMode::Amplify ? "amplify" : "noise"; }

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

std::string_view dataset_kind_name(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::DS1: return "ds1";
    case DatasetKind::DS2: return "ds2";
    case DatasetKind::DS3: return "ds3";
    case DatasetKind::Sine: return "sine";
    case DatasetKind::Sine6pt: return "sine6pt";
  }
  throw ContractError("unknown dataset kind");
}

DatasetKind parse_dataset_kind(const std::string& name) {
  const std::string n = lower(name);
  for (DatasetKind k : {DatasetKind::DS1, DatasetKind::DS2, DatasetKind::DS3, DatasetKind::Sine, DatasetKind::Sine6pt}) {
    if (n == dataset_kind_name(k)) return k;
  }
  throw ConfigError("unknown dataset '" + name + "' (expected ds1, ds2, ds3, sine or sine6pt)");
}

std::string_view model_family_name(ModelFamily family) {
  switch (family) {
    case ModelFamily::MLP: return "MLP";
    case ModelFamily::fMLP: return "fMLP";
    case ModelFamily::mMLP: return "mMLP";
    case ModelFamily::WGN: return "WGN";
    case ModelFamily::sWGN: return "sWGN";
    case ModelFamily::ConcatGen: return "ConcatGen";
  }
  throw ContractError("unknown model family");
}

ModelFamily parse_model_family(const std::string& name) {
  const std::string n = lower(name);
  for (ModelFamily f : {ModelFamily::MLP, ModelFamily::fMLP, ModelFamily::mMLP, ModelFamily::WGN, ModelFamily::sWGN,
                        ModelFamily::ConcatGen}) {
    if (n == lower(std::string(model_family_name(f)))) return f;
  }
  throw ConfigError("unknown model family '" + name + "' (expected MLP, fMLP, mMLP, WGN, sWGN or ConcatGen)");
}

// ---------------------------------------------------------------------------
// Config.

std::string ExperimentConfig::run_name() const {
  const MlpConfig main = MlpConfig::from_pl_qn(model.layers, model.nodes, 1, 1, model.activation);
  const bool generated = !pooled_family(model.family);
  return model_run_name(std::string(model_family_name(model.family)), main,
                        generated ? (model.meta_batch ? "MB" : "ST") : "");
}

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("experiment name must not be empty");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (model.layers < 1) throw ConfigError("layers (p in (pL,qN)) must be at least 1");
  if (model.nodes < 1) throw ConfigError("nodes (q in (pL,qN)) must be at least 1");
  if (model.generator.width == 0) throw ConfigError("generator width must be positive");
  train.validate();
  eval.smoothness.validate();
  for (int o : eval.smoothness_orders) {
    if (o < 0 || o > 2) throw ConfigError("smoothness orders must be 0, 1 or 2");
  }
  if (model.family == ModelFamily::fMLP && !is_grid(dataset.kind)) {
    throw ConfigError("fMLP needs a grid dataset (ds1, ds2 or ds3)");
  }
  if (model.family == ModelFamily::fMLP && model.fictitious.n_tasks < 2) {
    throw ConfigError("fMLP needs at least two fictitious tasks");
  }
  if (model.family == ModelFamily::sWGN && (!is_grid(dataset.kind) || !dataset.path.empty())) {
    throw ConfigError("sWGN relabels generated grid datasets; it cannot use sine or loaded data");
  }
  if (model.family == ModelFamily::sWGN && model.probe_count == 0) throw ConfigError("probe_count must be positive");
  if (single_task_family(*this) && eval.single_tasks == 0) throw ConfigError("single_tasks must be positive");
  if (!is_grid(dataset.kind)) {
    if (dataset.sine.train_tasks == 0 || dataset.sine.eval_tasks == 0) throw ConfigError("sine task counts must be positive");
    if (dataset.sine.points < 2) throw ConfigError("sine tasks need at least two points");
  } else if (dataset.path.empty()) {
    grid_spec_from_json(std::string(dataset_kind_name(dataset.kind)), dataset.overrides).validate();
  }
  if (dataset.perturb && dataset.perturb->mode == PerturbMode::Noise && !(dataset.perturb->noise_pct >= 0)) {
    throw ConfigError("noise_pct must be non-negative");
  }
}

ExperimentConfig experiment_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  ExperimentConfig c;
  try {
    c.name = get_or<std::string>(j, "name", c.name);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();

    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      c.dataset.kind = parse_dataset_kind(get_or<std::string>(d, "kind", "ds1"));
      c.dataset.overrides = get_or<json>(d, "overrides", json::object());
      if (d.contains("seed") && !d.at("seed").is_null()) c.dataset.seed = d.at("seed").get<std::uint64_t>();
      if (d.contains("sine")) {
        const json& s = d.at("sine");
        c.dataset.sine.train_tasks = get_or(s, "train_tasks", c.dataset.sine.train_tasks);
        c.dataset.sine.eval_tasks = get_or(s, "eval_tasks", c.dataset.sine.eval_tasks);
        c.dataset.sine.points = get_or(s, "points", c.dataset.sine.points);
      }
      if (d.contains("perturb") && !d.at("perturb").is_null()) {
        const json& p = d.at("perturb");
        PerturbSpec ps;
        const std::string mode = lower(get_or<std::string>(p, "mode", "amplify"));
        if (mode == "amplify") ps.mode = PerturbMode::Amplify;
        else if (mode == "noise") ps.mode = PerturbMode::Noise;
        else throw ConfigError("perturb mode must be amplify or noise");
        ps.amplify = get_or(p, "amplify", ps.amplify);
        ps.noise_pct = get_or(p, "noise_pct", ps.noise_pct);
        c.dataset.perturb = ps;
      }
      c.dataset.path = get_or<std::string>(d, "path", "");
    }

    if (j.contains("model")) {
      const json& m = j.at("model");
      c.model.family = parse_model_family(get_or<std::string>(m, "family", "WGN"));
      c.model.layers = get_or(m, "layers", c.model.layers);
      c.model.nodes = get_or(m, "nodes", c.model.nodes);
      if (m.contains("activation")) c.model.activation = activation_from_json(m.at("activation"));
      if (m.contains("meta_batch")) {
        const json& mb = m.at("meta_batch");
        if (mb.is_string()) {
          const std::string s = lower(mb.get<std::string>());
          if (s != "mb" && s != "st") throw ConfigError("meta_batch must be MB, ST or a boolean");
          c.model.meta_batch = s == "mb";
        } else {
          c.model.meta_batch = mb.get<bool>();
        }
      }
      if (m.contains("generator")) {
        const json& g = m.at("generator");
        c.model.generator.hidden_layers = get_or(g, "hidden_layers", c.model.generator.hidden_layers);
        c.model.generator.width = get_or(g, "width", c.model.generator.width);
        if (g.contains("activation")) c.model.generator.activation = parse_activation(g.at("activation").get<std::string>());
      }
      c.model.generate_activation = get_or(m, "generate_activation", c.model.generate_activation);
      c.model.probe_count = get_or(m, "probe_count", c.model.probe_count);
      if (m.contains("fictitious")) {
        const json& f = m.at("fictitious");
        FictitiousSpec& fs = c.model.fictitious;
        fs.n_tasks = get_or(f, "n_tasks", fs.n_tasks);
        fs.label_step = get_or(f, "label_step", fs.label_step);
        fs.y_shift_per_step = get_or(f, "y_shift_per_step", fs.y_shift_per_step);
        const std::string axis = lower(get_or<std::string>(f, "shift_axis", "y"));
        if (axis != "x" && axis != "y") throw ConfigError("fictitious shift_axis must be x or y");
        fs.shift_axis = axis == "x" ? ShiftAxis::X : ShiftAxis::Y;
        fs.x_column = get_or(f, "x_column", fs.x_column);
      }
      c.model.normalize_fictitious = get_or(m, "normalize_fictitious", c.model.normalize_fictitious);
    }

    c.train = train_config_from_json(get_or<json>(j, "train", json::object()), TrainConfig::desk());

    if (j.contains("eval")) {
      const json& e = j.at("eval");
      if (e.contains("smoothness")) {
        const json& s = e.at("smoothness");
        SmoothnessConfig& sc = c.eval.smoothness;
        sc.period = get_or(s, "period", sc.period);
        sc.step = get_or(s, "step", sc.step);
        sc.fd_h = get_or(s, "fd_h", sc.fd_h);
        sc.off_axis_points = get_or(s, "off_axis_points", sc.off_axis_points);
      }
      if (e.contains("smoothness_orders")) c.eval.smoothness_orders = e.at("smoothness_orders").get<std::vector<int>>();
      c.eval.single_tasks = get_or(e, "single_tasks", c.eval.single_tasks);
      c.eval.single_task_offset = get_or(e, "single_task_offset", c.eval.single_task_offset);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const ExperimentConfig& c) {
  json d = {{"kind", dataset_kind_name(c.dataset.kind)},
            {"overrides", c.dataset.overrides},
            {"seed", c.dataset.seed ? json(*c.dataset.seed) : json(nullptr)},
            {"sine",
             {{"train_tasks", c.dataset.sine.train_tasks},
              {"eval_tasks", c.dataset.sine.eval_tasks},
              {"points", c.dataset.sine.points}}},
            {"path", c.dataset.path}};
  if (c.dataset.perturb) {
    d["perturb"] = {{"mode", perturb_mode_name(c.dataset.perturb->mode)},
                    {"amplify", c.dataset.perturb->amplify},
                    {"noise_pct", c.dataset.perturb->noise_pct}};
  } else {
    d["perturb"] = nullptr;
  }
  const FictitiousSpec& f = c.model.fictitious;
  json m = {{"family", model_family_name(c.model.family)},
            {"layers", c.model.layers},
            {"nodes", c.model.nodes},
            {"activation", to_json(c.model.activation)},
            {"meta_batch", c.model.meta_batch ? "MB" : "ST"},
            {"generator",
             {{"hidden_layers", c.model.generator.hidden_layers},
              {"width", c.model.generator.width},
              {"activation", activation_name(c.model.generator.activation)}}},
            {"generate_activation", c.model.generate_activation},
            {"probe_count", c.model.probe_count},
            {"fictitious",
             {{"n_tasks", f.n_tasks},
              {"label_step", f.label_step},
              {"y_shift_per_step", f.y_shift_per_step},
              {"shift_axis", f.shift_axis == ShiftAxis::X ? "x" : "y"},
              {"x_column", f.x_column}}},
            {"normalize_fictitious", c.model.normalize_fictitious}};
  const SmoothnessConfig& s = c.eval.smoothness;
  json e = {{"smoothness",
             {{"period", s.period}, {"step", s.step}, {"fd_h", s.fd_h}, {"off_axis_points", s.off_axis_points}}},
            {"smoothness_orders", c.eval.smoothness_orders},
            {"single_tasks", c.eval.single_tasks},
            {"single_task_offset", c.eval.single_task_offset}};
  return {{"name", c.name}, {"seeds", c.seeds}, {"dataset", d}, {"model", m}, {"train", to_json(c.train)}, {"eval", e}};
}

// ---------------------------------------------------------------------------
// Data.

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  PreparedData out;
  out.seed = cfg.dataset.seed.value_or(seed);
  out.dataset_name = std::string(dataset_kind_name(cfg.dataset.kind));

  if (!cfg.dataset.path.empty()) {
    LoadedDataset loaded = load_dataset(cfg.dataset.path);
    const json& m = loaded.manifest;
    std::string stored;
    if (m.contains("dataset") && m.at("dataset").is_object()) stored = m.at("dataset").value("name", "");
    else if (m.contains("dataset") && m.at("dataset").is_string()) stored = m.at("dataset").get<std::string>();
    if (!stored.empty() && lower(stored) != out.dataset_name) {
      throw ConfigError("dataset at " + cfg.dataset.path + " is " + stored + ", config says " + out.dataset_name);
    }
    if (loaded.train.tasks.empty() || loaded.eval.tasks.empty()) {
      throw DataError("dataset at " + cfg.dataset.path + " needs both train and eval splits");
    }
    out.train = std::move(loaded.train);
    out.eval = std::move(loaded.eval);
    out.normalization = std::move(loaded.normalization);
  } else if (is_grid(cfg.dataset.kind)) {
    const GridDatasetSpec spec = grid_spec_from_json(out.dataset_name, cfg.dataset.overrides);
    GeneratedMetaData gen = gen_dataset(spec, out.seed);
    if (cfg.model.family == ModelFamily::sWGN) {
      relabel_with_grid_probes(gen, cfg.model.probe_count, derive_seed(out.seed, 0x70726f6265ULL));
    }
    out.train = std::move(gen.train);
    out.eval = std::move(gen.eval);
    out.normalization = std::move(gen.normalization);
  } else {
    const SineDatasetConfig& s = cfg.dataset.sine;
    MetaDataset train = gen_sine_tasks(s.train_tasks, s.points, std::nullopt, derive_seed(out.seed, 10));
    MetaDataset eval = gen_sine_tasks(s.eval_tasks, s.points, std::nullopt, derive_seed(out.seed, 11));
    if (cfg.dataset.kind == DatasetKind::Sine6pt) {
      std::vector<std::vector<double>> probes;
      for (double x : six_point_positions()) probes.push_back({x});
      // Nearest grid row; 1001 points over [0,10] hit every position exactly.
      const double tol = 0.5 * (SineRanges{}.x.hi - SineRanges{}.x.lo) / static_cast<double>(s.points - 1) + 1e-9;
      train = value_metaparams(train, probes, tol);
      eval = value_metaparams(eval, probes, tol);
    }
    auto [ntrain, rec] = normalize(train);
    out.train = std::move(ntrain);
    out.eval = normalize(eval).first;
    out.normalization = std::move(rec);
  }

  if (cfg.dataset.perturb) {
    const PerturbSpec& p = *cfg.dataset.perturb;
    out.train = perturb(out.train, p, derive_seed(out.seed, 0x7065727475ULL));
    if (p.mode == PerturbMode::Amplify) out.eval = perturb(out.eval, p, 0);
  }
  out.train.validate();
  out.eval.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Models and runs.

std::unique_ptr<Model> build_model(const ModelSpec& spec, std::size_t input_dim, std::size_t meta_dim,
                                   std::size_t output_dim, Rng& rng) {
  switch (spec.family) {
    case ModelFamily::MLP:
      return std::make_unique<MlpModel>(
          MlpConfig::from_pl_qn(spec.layers, spec.nodes, input_dim, output_dim, spec.activation), 0, rng);
    case ModelFamily::fMLP:
    case ModelFamily::mMLP:
      return std::make_unique<MlpModel>(
          MlpConfig::from_pl_qn(spec.layers, spec.nodes, input_dim + meta_dim, output_dim, spec.activation), meta_dim,
          rng);
    case ModelFamily::WGN:
    case ModelFamily::sWGN: {
      WgnConfig c;
      c.main = MlpConfig::from_pl_qn(spec.layers, spec.nodes, input_dim, output_dim, spec.activation);
      c.meta_dim = meta_dim;
      c.generator = spec.generator;
      c.generate_activation = spec.generate_activation;
      return std::make_unique<WgnModel>(c, rng);
    }
    case ModelFamily::ConcatGen: {
      ConcatGenConfig c;
      c.main = MlpConfig::from_pl_qn(spec.layers, spec.nodes, input_dim, output_dim, spec.activation);
      c.meta_dim = meta_dim;
      c.generator = spec.generator;
      return std::make_unique<ConcatGenModel>(c, rng);
    }
  }
  throw ContractError("unknown model family");
}

namespace {

MetaDataset single_task_set(const MetaDataset& like, MetaTask task) {
  MetaDataset md;
  md.input_names = like.input_names;
  md.target_names = like.target_names;
  md.input_ranges = like.input_ranges;
  md.tasks.push_back(std::move(task));
  return md;
}

void add_smoothness(SeedResult& r, const ExperimentConfig& cfg) {
  for (int order : cfg.eval.smoothness_orders) {
    SmoothnessConfig sc = cfg.eval.smoothness;
    sc.derivative_order = order;
    double total = 0.0;
    for (std::size_t i = 0; i < r.models.size(); ++i) total += smoothness_score(*r.models[i], r.eval_z[i], sc);
    r.smoothness.push_back({r.model_name, order, sc.period, sc.step, total});
  }
}

/// MLP and fMLP on grid data: one network per held-out task, trained on a
/// 640-point subsample of it and scored on the full task.
void run_single_tasks(SeedResult& r, const ExperimentConfig& cfg, const PreparedData& data) {
  const std::size_t n_points = cfg.dataset.path.empty()
                                   ? grid_spec_from_json(data.dataset_name, cfg.dataset.overrides).train_points
                                   : data.train.min_task_size();
  const bool fictitious = cfg.model.family == ModelFamily::fMLP;
  const std::vector<double> labels = cfg.model.fictitious.labels();
  const auto [lmin, lmax] = std::minmax_element(labels.begin(), labels.end());
  const AffineMap label_map{*lmin, *lmax};
  auto map_label = [&](double a) { return cfg.model.normalize_fictitious ? label_map.forward(a) : a; };

  r.score.model_name = r.model_name;
  r.score.dataset = data.dataset_name;
  r.score.seed = r.seed;
  for (std::size_t j = 0; j < cfg.eval.single_tasks; ++j) {
    const std::size_t k = (cfg.eval.single_task_offset + r.seed + j) % data.eval.tasks.size();
    MetaTask full = data.eval.tasks[k];
    full.z.clear();
    const MetaDataset full_set = single_task_set(data.eval, full);
    if (n_points > full.data.size()) throw ConfigError("single-task subsample exceeds the task size");
    const MetaDataset sub = subsample_points(full_set, n_points, derive_seed(r.seed, 0x73696e676cULL + j));

    MetaDataset train_set;
    std::vector<double> eval_z;
    if (fictitious) {
      train_set = fictitious_augment(sub.tasks.front().data, cfg.model.fictitious);
      for (auto& t : train_set.tasks) t.z[0] = map_label(t.z[0]);
      eval_z = {map_label(0.0)};
    } else {
      train_set = sub;
    }

    Rng init(derive_seed(r.seed, 1 + j));
    auto model = build_model(cfg.model, train_set.input_dim(), fictitious ? 1 : 0, train_set.output_dim(), init);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(r.seed, 0x1000 + j);
    tc.pooled = true;
    r.records.push_back(train(*model, train_set, tc, r.model_name));

    MetaTask scored = full;
    scored.z = eval_z;
    r.score.per_task.push_back(task_score(*model, scored));
    r.eval_z.push_back({eval_z});
    r.models.push_back(std::move(model));
  }
  double sum = 0.0;
  for (double s : r.score.per_task) sum += s;
  r.score.mean = sum / static_cast<double>(r.score.per_task.size());
}

}  // namespace

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const PreparedData* data) {
  cfg.validate();
  PreparedData local;
  if (data == nullptr) {
    local = prepare_data(cfg, seed);
    data = &local;
  }
  SeedResult r;
  r.seed = seed;
  r.model_name = cfg.run_name();

  if (single_task_family(cfg)) {
    run_single_tasks(r, cfg, *data);
  } else {
    const MetaDataset& train_set = data->train;
    const bool uses_z = cfg.model.family != ModelFamily::MLP;
    Rng init(derive_seed(seed, 1));
    auto model = build_model(cfg.model, train_set.input_dim(), uses_z ? train_set.meta_dim() : 0,
                             train_set.output_dim(), init);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(seed, 2);
    tc.pooled = pooled_family(cfg.model.family);
    if (!tc.pooled && !cfg.model.meta_batch) tc.meta_batch = 1;
    r.records.push_back(train(*model, train_set, tc, r.model_name));
    r.score = score_report(*model, data->eval, r.model_name, data->dataset_name, seed);
    std::vector<std::vector<double>> zs;
    if (uses_z) {
      for (const auto& t : data->eval.tasks) zs.push_back(t.z);
    } else {
      zs.emplace_back();
    }
    r.eval_z.push_back(std::move(zs));
    r.models.push_back(std::move(model));
  }
  add_smoothness(r, cfg);
  return r;
}

}  // namespace nff
