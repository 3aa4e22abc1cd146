#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "nff/metadata.hpp"
#include "nff/models.hpp"
#include "nff/random.hpp"

namespace nff {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  long long total_updates = 350000;
  double lr0 = 0.001;
  double lr_decay = 0.88;
  long long decay_every = 5000;
  std::size_t meta_batch = 16;
  std::size_t task_batch = 64;
  std::uint64_t seed = 0;
  AdamConfig adam;
  long long log_every = 1000;
  /// Plain batches: each update draws TB rows from the union of all tasks
  /// (packed as TB single-row tasks) instead of an MB x TB meta-batch.
  bool pooled = false;

  /// 20,000 updates on the same decay cadence.
  static TrainConfig desk();
  void validate() const;
};

/// lr0 * lr_decay^floor(step / decay_every).
double lr_at(long long step, const TrainConfig& cfg = {});

/// z (MB,1,N[z]), x (MB,TB,d_x), y (MB,TB,d_y) with the source indices.
struct MetaBatch {
  Tensor3 z;
  Tensor3 x;
  Tensor3 y;
  std::vector<std::size_t> tasks;
  std::vector<std::vector<std::size_t>> rows;
};

/// Tasks without replacement, then rows without replacement within each
/// task. Throws ConfigError when MB or TB exceed what `md` holds.
MetaBatch sample_meta_batch(const MetaDataset& md, std::size_t mb, std::size_t tb, Rng& rng);
/// TB (task,row) pairs drawn without replacement from the union of all rows,
/// packed as z (TB,1,N[z]), x (TB,1,d_x), y (TB,1,d_y).
MetaBatch sample_pooled_batch(const MetaDataset& md, std::size_t tb, Rng& rng);
/// Packs explicit task/row selections in the meta-batch layout.
MetaBatch pack_meta_batch(const MetaDataset& md, const std::vector<std::size_t>& tasks,
                          const std::vector<std::vector<std::size_t>>& rows);

/// First and second moments aligned with the parameter list they were
/// created for.
struct AdamState {
  long long t = 0;
  std::vector<Tensor3> m;
  std::vector<Tensor3> v;

  static AdamState for_params(const std::vector<Param*>& params);
};

/// One bias-corrected Adam update from each parameter's `grad`; parameters
/// that are not trainable are skipped.
void adam_step(const std::vector<Param*>& params, AdamState& state, double lr, const AdamConfig& cfg = {});
/// Same, with gradients taken from a backward() result (absent entries are zero).
void adam_step(const std::vector<Param*>& params, const GradientMap& grads, AdamState& state, double lr,
               const AdamConfig& cfg = {});

/// Mean squared error of the model on one batch, recorded on `tape`.
Var batch_loss(Tape& tape, const Model& model, const MetaBatch& batch);

struct LossEntry {
  long long step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct RunRecord {
  std::string name;
  std::uint64_t seed = 0;
  TrainConfig config;
  /// MB actually used: the requested MB clamped to the task count.
  std::size_t effective_meta_batch = 0;
  long long updates = 0;
  std::vector<LossEntry> history;
  std::vector<Tensor3> final_params;
  double wall_seconds = 0.0;
};

/// Runs cfg.total_updates Adam steps of MSE on sampled meta-batches.
/// Throws NumericAbort on a non-finite loss.
RunRecord train(Model& model, const MetaDataset& md, const TrainConfig& cfg, const std::string& name = "");

nlohmann::json to_json(const TrainConfig& cfg);
/// Starts from `base` and applies the keys present in `j`.
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = TrainConfig::desk());
/// Config echo, history and metadata; parameters live in the checkpoint.
nlohmann::json to_json(const RunRecord& record);
/// "step,lr,loss" rows.
void write_loss_csv(const std::filesystem::path& path, const RunRecord& record);

}  // namespace nff
