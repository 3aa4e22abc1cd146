#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nff/evaluation.hpp"
#include "nff/metadata.hpp"
#include "nff/models.hpp"
#include "nff/training.hpp"

namespace nff {

enum class DatasetKind { DS1, DS2, DS3, Sine, Sine6pt };
std::string_view dataset_kind_name(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& name);

struct SineDatasetConfig {
  std::size_t train_tasks = 100;
  std::size_t eval_tasks = 8;
  /// Uniform x samples per task over [0,10]; 1001 puts every six-point
  /// position on the grid.
  std::size_t points = 1001;
};

struct DatasetConfig {
  DatasetKind kind = DatasetKind::DS1;
  /// Grid spec overrides (see grid_spec_from_json).
  nlohmann::json overrides = nlohmann::json::object();
  /// Fixed dataset seed; when unset each run seed generates its own data.
  std::optional<std::uint64_t> seed;
  SineDatasetConfig sine;
  std::optional<PerturbSpec> perturb;
  /// Load a dataset directory written by gen-data instead of generating.
  std::string path;
};

enum class ModelFamily { MLP, fMLP, mMLP, WGN, sWGN, ConcatGen };
std::string_view model_family_name(ModelFamily family);
ModelFamily parse_model_family(const std::string& name);

struct ModelSpec {
  ModelFamily family = ModelFamily::WGN;
  std::size_t layers = 4;  // p in (pL,qN)
  std::size_t nodes = 16;  // q in (pL,qN)
  ActivationSpec activation = ActivationSpec::of(ActivationKind::ISLU1b);
  /// Meta-batch training (MB); false trains one metaparameter set per update (ST).
  bool meta_batch = true;
  GeneratorShape generator;
  bool generate_activation = true;
  std::size_t probe_count = 10;
  FictitiousSpec fictitious;
  /// Map the fictitious label range onto [0,1] before training.
  bool normalize_fictitious = true;
};

struct EvalConfig {
  SmoothnessConfig smoothness;
  std::vector<int> smoothness_orders;
  /// Tasks scored by single-task models (MLP, fMLP on grid datasets); each
  /// gets its own trained network.
  std::size_t single_tasks = 8;
  /// First eval task used by single-task models; the run seed is added.
  std::size_t single_task_offset = 0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetConfig dataset;
  ModelSpec model;
  TrainConfig train = TrainConfig::desk();
  EvalConfig eval;
  std::vector<std::uint64_t> seeds{0};

  /// "[structure]_(pL,qN)_[activation]_[info]".
  std::string run_name() const;
  /// Dimensional and family/dataset compatibility checks; throws ConfigError.
  void validate() const;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& cfg);

struct PreparedData {
  std::string dataset_name;
  MetaDataset train;
  MetaDataset eval;
  NormalizationRecord normalization;
  std::uint64_t seed = 0;
};

/// Generates (or loads) and transforms the data a run of `cfg` needs.
PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  std::string model_name;
  std::vector<std::unique_ptr<Model>> models;
  std::vector<RunRecord> records;
  /// Metaparameters each model is evaluated at (one list per model).
  std::vector<std::vector<std::vector<double>>> eval_z;
  ScoreReport score;
  std::vector<SmoothnessRow> smoothness;
};

/// Builds, trains and scores the configured model for one seed.
SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const PreparedData* data = nullptr);

/// Untrained model of the configured family for a dataset's dimensions.
std::unique_ptr<Model> build_model(const ModelSpec& spec, std::size_t input_dim, std::size_t meta_dim,
                                   std::size_t output_dim, Rng& rng);

}  // namespace nff
