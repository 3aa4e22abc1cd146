// nff: dataset generation, training, scoring and NF export.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nff/checkpoint.hpp"
#include "nff/csv.hpp"
#include "nff/dataset_io.hpp"
#include "nff/error.hpp"
#include "nff/evaluation.hpp"
#include "nff/experiment.hpp"
#include "nff/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nff;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

/// `<root>/<command>-YYYYmmdd-HHMMSS[-n]`, never an existing directory.
fs::path fresh_run_dir(const fs::path& root, const std::string& command, const std::string& explicit_dir) {
  if (!explicit_dir.empty()) {
    if (fs::exists(explicit_dir)) throw ConfigError("output directory " + explicit_dir + " already exists");
    fs::create_directories(explicit_dir);
    return explicit_dir;
  }
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream stem;
  stem << command << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
  fs::path dir = root / stem.str();
  for (int n = 1; fs::exists(dir); ++n) dir = root / (stem.str() + "-" + std::to_string(n));
  fs::create_directories(dir);
  return dir;
}

struct OutputOptions {
  std::string root = "runs";
  std::string dir;

  void add(CLI::App* cmd) {
    cmd->add_option("--out-root", root, "Parent of the timestamped run directory")->capture_default_str();
    cmd->add_option("--out", dir, "Exact output directory (must not exist)");
  }
  fs::path make(const std::string& command) const { return fresh_run_dir(root, command, dir); }
};

/// Experiment config from an optional file, with flag overrides applied on top.
struct ConfigOptions {
  std::string file;
  std::optional<std::string> dataset;
  std::optional<std::string> data_path;
  std::optional<std::string> family;
  std::optional<std::size_t> layers;
  std::optional<std::size_t> nodes;
  std::optional<std::string> activation;
  std::optional<std::string> batching;
  std::optional<long long> updates;
  std::optional<std::size_t> meta_batch;
  std::optional<std::size_t> task_batch;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> data_seed;
  std::vector<int> orders;

  void add(CLI::App* cmd) {
    cmd->add_option("-c,--config", file, "Experiment config JSON")->check(CLI::ExistingFile);
    cmd->add_option("--dataset", dataset, "ds1, ds2, ds3, sine or sine6pt");
    cmd->add_option("--data", data_path, "Dataset directory written by gen-data");
    cmd->add_option("--model", family, "MLP, fMLP, mMLP, WGN, sWGN or ConcatGen");
    cmd->add_option("--layers", layers, "p in (pL,qN)");
    cmd->add_option("--nodes", nodes, "q in (pL,qN)");
    cmd->add_option("--activation", activation, "Main-net activation name");
    cmd->add_option("--batching", batching, "MB or ST")->check(CLI::IsMember({"MB", "ST", "mb", "st"}));
    cmd->add_option("--updates", updates, "Total Adam updates");
    cmd->add_option("--meta-batch", meta_batch, "MB (tasks per update)");
    cmd->add_option("--task-batch", task_batch, "TB (points per task per update)");
    cmd->add_option("--seeds", seeds, "Run seeds");
    cmd->add_option("--data-seed", data_seed, "Fixed dataset seed (default: the run seed)");
    cmd->add_option("--orders", orders, "Smoothness derivative orders to report");
  }

  ExperimentConfig build() const {
    json j = file.empty() ? json::object() : read_json_file(file);
    if (!j.is_object()) throw ConfigError(file + ": experiment config must be a JSON object");
    if (dataset) j["dataset"]["kind"] = *dataset;
    if (data_path) j["dataset"]["path"] = *data_path;
    if (data_seed) j["dataset"]["seed"] = *data_seed;
    if (family) j["model"]["family"] = *family;
    if (layers) j["model"]["layers"] = *layers;
    if (nodes) j["model"]["nodes"] = *nodes;
    if (activation) {
      if (j["model"].contains("activation") && j["model"]["activation"].is_object()) {
        j["model"]["activation"]["kind"] = *activation;
      } else {
        j["model"]["activation"] = *activation;
      }
    }
    if (batching) j["model"]["meta_batch"] = *batching;
    if (updates) j["train"]["total_updates"] = *updates;
    if (meta_batch) j["train"]["meta_batch"] = *meta_batch;
    if (task_batch) j["train"]["task_batch"] = *task_batch;
    if (!seeds.empty()) j["seeds"] = seeds;
    if (!orders.empty()) j["eval"]["smoothness_orders"] = orders;
    return experiment_from_json(j);
  }
};

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("cannot parse '" + item + "' as a number");
    }
  }
  return out;
}

std::string checkpoint_name(const LoadedCheckpoint& ck, const fs::path& path) {
  return ck.run.value("name", path.stem().string());
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const ConfigOptions& co, const OutputOptions& out, const std::string& mode) {
  ExperimentConfig cfg = co.build();
  const std::uint64_t seed = cfg.dataset.seed.value_or(cfg.seeds.front());
  const std::string name(dataset_kind_name(cfg.dataset.kind));
  std::size_t files = 0;
  const fs::path dir = out.make("gen-data");
  if (cfg.dataset.kind == DatasetKind::DS1 || cfg.dataset.kind == DatasetKind::DS2 ||
      cfg.dataset.kind == DatasetKind::DS3) {
    if (cfg.dataset.perturb) throw ConfigError("gen-data writes clean data; use the perturb command");
    const GeneratedMetaData gen = gen_dataset(grid_spec_from_json(name, cfg.dataset.overrides), seed);
    files = write_generated_dataset(dir, gen, mode == "split" ? DatasetWriteMode::Split : DatasetWriteMode::Full);
  } else {
    if (cfg.model.family == ModelFamily::fMLP || cfg.model.family == ModelFamily::sWGN) cfg.model.family = ModelFamily::WGN;
    cfg.dataset.perturb.reset();
    const PreparedData data = prepare_data(cfg, seed);
    files = write_split_dataset(dir, data.train, data.eval, data.normalization, {{"dataset", name}, {"seed", seed}});
  }
  std::cout << "wrote " << files << " task files and manifest.json to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const ConfigOptions& co, const OutputOptions& out) {
  const ExperimentConfig cfg = co.build();
  const fs::path dir = out.make("train");
  write_json_file(dir / "config.json", to_json(cfg));

  std::vector<SeedResult> results(cfg.seeds.size());
  std::mutex log_mutex;
  // Seeds are independent; inner evaluation runs single-threaded per seed
  // when the seed sweep already fills the workers.
  parallel_for(cfg.seeds.size(), [&](std::size_t i) {
    const std::uint64_t seed = cfg.seeds[i];
    results[i] = run_seed(cfg, seed);
    std::lock_guard lock(log_mutex);
    std::cerr << cfg.run_name() << " seed " << seed << ": score " << format_double(results[i].score.mean) << "\n";
  });

  std::vector<ScoreReport> reports;
  std::vector<SmoothnessRow> smooth;
  for (const SeedResult& r : results) {
    const fs::path sdir = dir / ("seed_" + std::to_string(r.seed));
    for (std::size_t m = 0; m < r.models.size(); ++m) {
      const std::string suffix = r.models.size() == 1 ? "" : "_" + std::to_string(m);
      json run = to_json(r.records[m]);
      run["dataset"] = r.score.dataset;
      run["experiment"] = cfg.name;
      run["eval_z"] = r.eval_z[m];
      save_checkpoint(sdir / ("checkpoint" + suffix + ".json"), *r.models[m], run);
      write_json_file(sdir / ("run" + suffix + ".json"), run);
      write_loss_csv(sdir / ("loss" + suffix + ".csv"), r.records[m]);
    }
    reports.push_back(r.score);
    smooth.insert(smooth.end(), r.smoothness.begin(), r.smoothness.end());
  }
  write_scores_csv(dir / "scores.csv", reports);
  write_task_scores_csv(dir / "task_scores.csv", reports);
  if (!smooth.empty()) write_smoothness_csv(dir / "smoothness.csv", smooth);
  std::cout << "wrote " << results.size() << " seed run(s) to " << dir.string() << "\n";
  return 0;
}

/// Metaparameters to evaluate a checkpoint at on `eval`: the tasks' own z,
/// or the fixed z the run recorded (fictitious-label models).
std::vector<double> task_z(const Model& model, const json& run, const MetaTask& task) {
  if (model.meta_dim() == 0) return {};
  if (task.z.size() == model.meta_dim()) return task.z;
  if (run.contains("eval_z") && !run.at("eval_z").empty()) {
    auto z = run.at("eval_z").at(0).get<std::vector<double>>();
    if (z.size() == model.meta_dim()) return z;
  }
  throw ConfigError("model takes " + std::to_string(model.meta_dim()) + " metaparameters, the dataset has " +
                    std::to_string(task.z.size()));
}

int cmd_score(const std::vector<std::string>& checkpoints, const std::string& data, const std::string& split,
              const OutputOptions& out) {
  std::vector<ScoreReport> reports;
  std::string dataset_name;
  LoadedDataset ld;
  if (!checkpoints.empty()) {
    if (data.empty()) throw ConfigError("score needs --data when checkpoints are given");
    ld = load_dataset(data);
    const json& m = ld.manifest;
    if (m.contains("dataset")) {
      dataset_name = m.at("dataset").is_object() ? m.at("dataset").value("name", "") : m.at("dataset").get<std::string>();
    }
  }
  const MetaDataset& md = split == "train" ? ld.train : ld.eval;
  for (const std::string& path : checkpoints) {
    const LoadedCheckpoint ck = load_checkpoint(path);
    MetaDataset scored = md;
    for (auto& t : scored.tasks) t.z = task_z(*ck.model, ck.run, t);
    reports.push_back(score_report(*ck.model, scored, checkpoint_name(ck, path), dataset_name,
                                   ck.run.value("seed", std::uint64_t{0})));
  }
  const fs::path dir = out.make("score");
  write_scores_csv(dir / "scores.csv", reports);
  write_task_scores_csv(dir / "task_scores.csv", reports);
  for (const auto& r : reports) std::cout << r.model_name << " " << format_double(r.mean) << "\n";
  std::cout << "wrote " << (dir / "scores.csv").string() << "\n";
  return 0;
}

struct SmoothnessOptions {
  std::vector<std::string> checkpoints;
  std::string data;
  std::string z;
  std::vector<int> orders{0, 1, 2};
  SmoothnessConfig cfg;
  std::size_t curve_axis = 0;
  std::size_t curve_points = 201;
  double curve_base = 0.5;
};

int cmd_smoothness(const SmoothnessOptions& o, const OutputOptions& out) {
  if (o.checkpoints.empty()) throw ConfigError("smoothness needs at least one --checkpoint");
  LoadedDataset ld;
  if (!o.data.empty()) ld = load_dataset(o.data);
  std::vector<SmoothnessRow> rows;
  std::vector<NamedCurve> curves;
  for (const std::string& path : o.checkpoints) {
    const LoadedCheckpoint ck = load_checkpoint(path);
    const Model& model = *ck.model;
    const std::string name = checkpoint_name(ck, path);
    std::vector<std::vector<double>> zs;
    if (!o.z.empty()) zs.push_back(parse_values(o.z));
    else if (!o.data.empty()) for (const auto& t : ld.eval.tasks) zs.push_back(task_z(model, ck.run, t));
    else if (model.meta_dim() == 0) zs.emplace_back();
    else if (ck.run.contains("eval_z")) zs = ck.run.at("eval_z").get<std::vector<std::vector<double>>>();
    else throw ConfigError(name + " takes metaparameters: pass --z or --data");
    for (const auto& z : zs) {
      if (z.size() != model.meta_dim()) throw ConfigError(name + ": z has the wrong length");
    }
    for (int order : o.orders) {
      SmoothnessConfig sc = o.cfg;
      sc.derivative_order = order;
      rows.push_back({name, order, sc.period, sc.step, smoothness_score(model, zs, sc)});
      std::cout << name << " order " << order << " " << format_double(rows.back().score) << "\n";
    }
    if (o.curve_axis >= model.input_dim()) throw ConfigError("--curve-axis is out of range");
    std::vector<double> grid(o.curve_points);
    for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<double>(i) / static_cast<double>(grid.size() - 1);
    const std::vector<double> base(model.input_dim(), o.curve_base);
    for (int order = 0; order <= 2; ++order) {
      curves.push_back({name, derivative_curve(model, zs.front(), base, o.curve_axis, order, grid,
                                               o.cfg.effective_fd_h())});
    }
  }
  const fs::path dir = out.make("smoothness");
  write_smoothness_csv(dir / "smoothness.csv", rows);
  write_curves_csv(dir / "curves.csv", curves);
  std::cout << "wrote " << (dir / "smoothness.csv").string() << "\n";
  return 0;
}

std::vector<double> resolve_z(const Model& model, const std::string& z_text, const std::string& data,
                              std::size_t task) {
  if (!z_text.empty()) return parse_values(z_text);
  if (!data.empty()) {
    const LoadedDataset ld = load_dataset(data);
    if (task >= ld.eval.tasks.size()) throw ConfigError("--task is out of range");
    return ld.eval.tasks[task].z;
  }
  if (model.meta_dim() == 0) return {};
  throw ConfigError("pass --z or --data to choose metaparameters");
}

int cmd_export_nf(const std::string& checkpoint, const std::string& z_text, const std::string& data,
                  std::size_t task, const OutputOptions& out) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const auto* wgn = dynamic_cast<const WgnModel*>(ck.model.get());
  if (wgn == nullptr) throw ConfigError("export-nf needs a WGN checkpoint");
  const std::vector<double> z = resolve_z(*wgn, z_text, data, task);
  if (z.size() != wgn->meta_dim()) {
    throw ConfigError("z has " + std::to_string(z.size()) + " values, the model takes " +
                      std::to_string(wgn->meta_dim()));
  }
  for (double v : z) {
    if (!(v >= 0.0 && v <= 1.0)) {
      std::cerr << "warning: z value " << format_double(v) << " is outside the normalized range [0,1]; "
                   "the NF extrapolates\n";
    }
  }
  const MlpModel nf(wgn->extract(z), 0);
  json run = {{"source", checkpoint}, {"z", z}, {"name", checkpoint_name(ck, checkpoint) + "_NF"}};
  if (ck.run.contains("seed")) run["seed"] = ck.run.at("seed");
  const fs::path dir = out.make("export-nf");
  save_checkpoint(dir / "nf.json", nf, run);
  std::cout << "main-network parameters: " << nf.param_count().main << "\n";
  std::cout << "wrote " << (dir / "nf.json").string() << "\n";
  return 0;
}

int cmd_basis_dump(const std::string& checkpoint, const std::string& z_text, const std::string& data,
                   std::size_t task, std::size_t axis, double lo, double hi, std::size_t points, double base,
                   const OutputOptions& out) {
  if (points < 2) throw ConfigError("--points must be at least 2");
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const Model& model = *ck.model;
  const std::vector<double> z = resolve_z(model, z_text, data, task);
  Mlp net;
  if (const auto* w = dynamic_cast<const WgnModel*>(&model)) {
    net = w->extract(z);
  } else if (const auto* m = dynamic_cast<const MlpModel*>(&model)) {
    net = m->mlp();
  } else {
    throw ConfigError("basis-dump needs an MLP or WGN checkpoint");
  }
  if (z.size() != model.meta_dim()) throw ConfigError("z has the wrong length");
  if (axis >= model.input_dim()) throw ConfigError("--axis is out of range");
  const bool appends_z = model.kind() == ModelKind::MLP;
  const std::size_t d = net.config.input_dim();
  std::vector<double> grid(points);
  Tensor3 x({1, points, d});
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    for (std::size_t c = 0; c < model.input_dim(); ++c) x(0, i, c) = c == axis ? grid[i] : base;
    if (appends_z) {
      for (std::size_t c = 0; c < z.size(); ++c) x(0, i, model.input_dim() + c) = z[c];
    }
  }
  const fs::path dir = out.make("basis-dump");
  write_basis_csv(dir / "basis.csv", grid, dump_layer_outputs(net, x));
  std::cout << "wrote " << (dir / "basis.csv").string() << "\n";
  return 0;
}

int cmd_perturb(const std::string& data, const std::string& mode, double amplify, double noise_pct,
                std::uint64_t seed, const OutputOptions& out) {
  PerturbSpec spec;
  spec.mode = mode == "noise" ? PerturbMode::Noise : PerturbMode::Amplify;
  spec.amplify = amplify;
  spec.noise_pct = noise_pct;
  LoadedDataset ld = load_dataset(data);
  const MetaDataset train = perturb(ld.train, spec, seed);
  // Noise corrupts only what the model learns from; amplification rescales the whole problem.
  const MetaDataset eval = spec.mode == PerturbMode::Amplify ? perturb(ld.eval, spec, seed) : ld.eval;
  json extra = {{"source", data},
                {"perturb", {{"mode", mode}, {"amplify", amplify}, {"noise_pct", noise_pct}, {"seed", seed}}}};
  if (ld.manifest.contains("dataset")) {
    const json& d = ld.manifest.at("dataset");
    extra["dataset"] = d.is_object() ? d.value("name", "") : d.get<std::string>();
  }
  const fs::path dir = out.make("perturb");
  const std::size_t files = write_split_dataset(dir, train, eval, ld.normalization, extra);
  std::cout << "wrote " << files << " task files and manifest.json to " << dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural functions from metadata: data generation, training, scoring and NF export"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a dataset directory (task CSVs + manifest.json)");
  ConfigOptions gen_cfg;
  OutputOptions gen_out;
  std::string gen_mode = "full";
  gen_cfg.add(gen);
  gen_out.add(gen);
  gen->add_option("--mode", gen_mode, "full: every grid task; split: train and eval tasks only")
      ->check(CLI::IsMember({"full", "split"}))
      ->capture_default_str();

  // train
  auto* tr = app.add_subcommand("train", "Train, score and checkpoint one model per seed");
  ConfigOptions tr_cfg;
  OutputOptions tr_out;
  tr_cfg.add(tr);
  tr_out.add(tr);

  // score
  auto* sc = app.add_subcommand("score", "Score checkpoints on a dataset's held-out tasks");
  std::vector<std::string> sc_ck;
  std::string sc_data, sc_split = "eval";
  OutputOptions sc_out;
  sc->add_option("--checkpoint", sc_ck, "Checkpoint JSON (repeatable)");
  sc->add_option("--data", sc_data, "Dataset directory");
  sc->add_option("--split", sc_split, "eval or train")->check(CLI::IsMember({"eval", "train"}))->capture_default_str();
  sc_out.add(sc);

  // smoothness
  auto* sm = app.add_subcommand("smoothness", "Smoothness scores and derivative curves");
  SmoothnessOptions sm_opt;
  OutputOptions sm_out;
  sm->add_option("--checkpoint", sm_opt.checkpoints, "Checkpoint JSON (repeatable)");
  sm->add_option("--data", sm_opt.data, "Evaluate at the held-out tasks' metaparameters");
  sm->add_option("--z", sm_opt.z, "Comma-separated metaparameters");
  sm->add_option("--orders", sm_opt.orders, "Derivative orders")->capture_default_str();
  sm->add_option("--period", sm_opt.cfg.period, "Window spacing")->capture_default_str();
  sm->add_option("--step", sm_opt.cfg.step, "Window advance")->capture_default_str();
  sm->add_option("--fd-h", sm_opt.cfg.fd_h, "Finite-difference step (default period/2)");
  sm->add_option("--off-axis-points", sm_opt.cfg.off_axis_points, "Grid points per off-axis dimension")
      ->capture_default_str();
  sm->add_option("--curve-axis", sm_opt.curve_axis, "Input axis of the dumped derivative curves")->capture_default_str();
  sm->add_option("--curve-points", sm_opt.curve_points, "Samples per derivative curve")->capture_default_str();
  sm->add_option("--curve-base", sm_opt.curve_base, "Value of the other inputs along the curves")->capture_default_str();
  sm_out.add(sm);

  // export-nf
  auto* ex = app.add_subcommand("export-nf", "Materialize the compact NF of a WGN at given metaparameters");
  std::string ex_ck, ex_z, ex_data;
  std::size_t ex_task = 0;
  OutputOptions ex_out;
  ex->add_option("--checkpoint", ex_ck, "WGN checkpoint JSON")->required();
  ex->add_option("--z", ex_z, "Comma-separated normalized metaparameters");
  ex->add_option("--data", ex_data, "Take z from a held-out task of this dataset");
  ex->add_option("--task", ex_task, "Held-out task index used with --data")->capture_default_str();
  ex_out.add(ex);

  // basis-dump
  auto* bd = app.add_subcommand("basis-dump", "Per-layer node outputs along one input axis");
  std::string bd_ck, bd_z, bd_data;
  std::size_t bd_task = 0, bd_axis = 0, bd_points = 201;
  double bd_lo = 0.0, bd_hi = 1.0, bd_base = 0.5;
  OutputOptions bd_out;
  bd->add_option("--checkpoint", bd_ck, "MLP or WGN checkpoint JSON")->required();
  bd->add_option("--z", bd_z, "Comma-separated metaparameters");
  bd->add_option("--data", bd_data, "Take z from a held-out task of this dataset");
  bd->add_option("--task", bd_task, "Held-out task index used with --data")->capture_default_str();
  bd->add_option("--axis", bd_axis, "Swept input axis")->capture_default_str();
  bd->add_option("--lo", bd_lo, "Grid start")->capture_default_str();
  bd->add_option("--hi", bd_hi, "Grid end")->capture_default_str();
  bd->add_option("--points", bd_points, "Grid size")->capture_default_str();
  bd->add_option("--base", bd_base, "Value of the other inputs")->capture_default_str();
  bd_out.add(bd);

  // perturb
  auto* pe = app.add_subcommand("perturb", "Write an amplified or noisy copy of a dataset");
  std::string pe_data, pe_mode = "amplify";
  double pe_amp = 20.0, pe_noise = 1.0;
  std::uint64_t pe_seed = 0;
  OutputOptions pe_out;
  pe->add_option("--data", pe_data, "Dataset directory")->required();
  pe->add_option("--mode", pe_mode, "amplify or noise")->check(CLI::IsMember({"amplify", "noise"}))->capture_default_str();
  pe->add_option("--amplify", pe_amp, "Target scale for amplify")->capture_default_str();
  pe->add_option("--noise-pct", pe_noise, "Relative noise in percent")->capture_default_str();
  pe->add_option("--seed", pe_seed, "Noise seed")->capture_default_str();
  pe_out.add(pe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_data(gen_cfg, gen_out, gen_mode);
    if (*tr) return cmd_train(tr_cfg, tr_out);
    if (*sc) return cmd_score(sc_ck, sc_data, sc_split, sc_out);
    if (*sm) return cmd_smoothness(sm_opt, sm_out);
    if (*ex) return cmd_export_nf(ex_ck, ex_z, ex_data, ex_task, ex_out);
    if (*bd) return cmd_basis_dump(bd_ck, bd_z, bd_data, bd_task, bd_axis, bd_lo, bd_hi, bd_points, bd_base, bd_out);
    if (*pe) return cmd_perturb(pe_data, pe_mode, pe_amp, pe_noise, pe_seed, pe_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParameterError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
