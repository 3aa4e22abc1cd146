#include "nff/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "nff/csv.hpp"
#include "nff/error.hpp"

namespace nff {

using nlohmann::json;

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.total_updates = 20000;
  return c;
}

void TrainConfig::validate() const {
  if (total_updates < 0) throw ConfigError("total_updates must be non-negative");
  if (!(lr0 > 0)) throw ConfigError("lr0 must be positive");
  if (!(lr_decay > 0)) throw ConfigError("lr_decay must be positive");
  if (decay_every <= 0) throw ConfigError("decay_every must be positive");
  if (meta_batch == 0) throw ConfigError("meta_batch must be positive");
  if (task_batch == 0) throw ConfigError("task_batch must be positive");
  if (log_every <= 0) throw ConfigError("log_every must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) || !(adam.eps > 0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
}

double lr_at(long long step, const TrainConfig& cfg) {
  if (step < 0) throw ContractError("lr_at: step must be non-negative");
  return cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(step / cfg.decay_every));
}

MetaBatch pack_meta_batch(const MetaDataset& md, const std::vector<std::size_t>& tasks,
                          const std::vector<std::vector<std::size_t>>& rows) {
  const std::size_t mb = tasks.size();
  if (rows.size() != mb || mb == 0) throw ContractError("pack_meta_batch: one row list per task required");
  const std::size_t tb = rows.front().size();
  const std::size_t nz = md.meta_dim(), dx = md.input_dim(), dy = md.output_dim();
  MetaBatch b{Tensor3({mb, 1, nz}), Tensor3({mb, tb, dx}), Tensor3({mb, tb, dy}), tasks, rows};
  for (std::size_t m = 0; m < mb; ++m) {
    const MetaTask& task = md.tasks.at(tasks[m]);
    if (rows[m].size() != tb) throw ContractError("pack_meta_batch: ragged task batch");
    for (std::size_t c = 0; c < nz; ++c) b.z(m, 0, c) = task.z[c];
    for (std::size_t t = 0; t < tb; ++t) {
      const std::size_t r = rows[m][t];
      for (std::size_t c = 0; c < dx; ++c) b.x(m, t, c) = task.data.x(0, r, c);
      for (std::size_t c = 0; c < dy; ++c) b.y(m, t, c) = task.data.y(0, r, c);
    }
  }
  return b;
}

MetaBatch sample_meta_batch(const MetaDataset& md, std::size_t mb, std::size_t tb, Rng& rng) {
  if (mb == 0 || mb > md.tasks.size()) {
    throw ConfigError("meta batch " + std::to_string(mb) + " exceeds the " + std::to_string(md.tasks.size()) +
                      " available tasks");
  }
  std::vector<std::size_t> tasks = rng.sample_without_replacement(md.tasks.size(), mb);
  std::vector<std::vector<std::size_t>> rows;
  rows.reserve(mb);
  for (std::size_t k : tasks) {
    const std::size_t n = md.tasks[k].data.size();
    if (tb == 0 || tb > n) {
      throw ConfigError("task batch " + std::to_string(tb) + " exceeds the " + std::to_string(n) +
                        " points of task " + std::to_string(k));
    }
    rows.push_back(rng.sample_without_replacement(n, tb));
  }
  return pack_meta_batch(md, tasks, rows);
}

MetaBatch sample_pooled_batch(const MetaDataset& md, std::size_t tb, Rng& rng) {
  std::vector<std::size_t> offsets{0};
  for (const auto& t : md.tasks) offsets.push_back(offsets.back() + t.data.size());
  const std::size_t total = offsets.back();
  if (tb == 0 || tb > total) {
    throw ConfigError("task batch " + std::to_string(tb) + " exceeds the " + std::to_string(total) + " pooled points");
  }
  std::vector<std::size_t> tasks;
  std::vector<std::vector<std::size_t>> rows;
  tasks.reserve(tb);
  rows.reserve(tb);
  for (std::size_t flat : rng.sample_without_replacement(total, tb)) {
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat) - 1;
    const auto k = static_cast<std::size_t>(it - offsets.begin());
    tasks.push_back(k);
    rows.push_back({flat - *it});
  }
  return pack_meta_batch(md, tasks, rows);
}

AdamState AdamState::for_params(const std::vector<Param*>& params) {
  AdamState s;
  for (const Param* p : params) {
    s.m.emplace_back(p->value.shape());
    s.v.emplace_back(p->value.shape());
  }
  return s;
}

void adam_step(const std::vector<Param*>& params, AdamState& state, double lr, const AdamConfig& cfg) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("Adam state does not match the parameter list");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.trainable) continue;
    Tensor3& m = state.m[i];
    Tensor3& v = state.v[i];
    if (m.shape() != p.value.shape() || p.grad.shape() != p.value.shape()) {
      throw ContractError("Adam state shape mismatch for " + p.name);
    }
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p.value[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

void adam_step(const std::vector<Param*>& params, const GradientMap& grads, AdamState& state, double lr,
               const AdamConfig& cfg) {
  store_gradients(grads, params);
  adam_step(params, state, lr, cfg);
}

Var batch_loss(Tape& tape, const Model& model, const MetaBatch& batch) {
  const Var z = tape.constant(batch.z);
  const Var x = tape.constant(batch.x);
  const Var y = tape.constant(batch.y);
  return mse(model.forward(tape, z, x), y);
}

RunRecord train(Model& model, const MetaDataset& md, const TrainConfig& cfg, const std::string& name) {
  cfg.validate();
  md.validate();
  if (md.tasks.empty()) throw DataError("training set is empty");
  if (model.input_dim() != md.input_dim() || model.output_dim() != md.output_dim() ||
      (model.meta_dim() != 0 && model.meta_dim() != md.meta_dim())) {
    throw ConfigError("model dimensions (x " + std::to_string(model.input_dim()) + ", z " +
                      std::to_string(model.meta_dim()) + ", y " + std::to_string(model.output_dim()) +
                      ") do not match the dataset (x " + std::to_string(md.input_dim()) + ", z " +
                      std::to_string(md.meta_dim()) + ", y " + std::to_string(md.output_dim()) + ")");
  }
  if (!cfg.pooled && cfg.task_batch > md.min_task_size()) {
    throw ConfigError("task batch " + std::to_string(cfg.task_batch) + " exceeds the smallest task (" +
                      std::to_string(md.min_task_size()) + " points)");
  }

  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.name = name;
  rec.seed = cfg.seed;
  rec.config = cfg;
  rec.effective_meta_batch = cfg.pooled ? 1 : std::min(cfg.meta_batch, md.tasks.size());

  Rng rng(derive_seed(cfg.seed, 0x747261696eULL));
  const std::vector<Param*> params = model.parameters();
  AdamState state = AdamState::for_params(params);

  for (long long step = 0; step < cfg.total_updates; ++step) {
    const double lr = lr_at(step, cfg);
    const MetaBatch batch = cfg.pooled ? sample_pooled_batch(md, cfg.task_batch, rng)
                                       : sample_meta_batch(md, rec.effective_meta_batch, cfg.task_batch, rng);
    Tape tape;
    const Var loss = batch_loss(tape, model, batch);
    const double l = loss.value().item();
    if (!std::isfinite(l)) {
      throw NumericAbort("non-finite loss at step " + std::to_string(step) + " (lr " + format_double(lr) + ")",
                         step, lr);
    }
    if (step % cfg.log_every == 0 || step + 1 == cfg.total_updates) rec.history.push_back({step, lr, l});
    adam_step(params, tape.backward(loss), state, lr, cfg.adam);
    ++rec.updates;
  }
  for (Param* p : params) {
    p->zero_grad();
    rec.final_params.push_back(p->value);
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

json to_json(const TrainConfig& cfg) {
  return {{"total_updates", cfg.total_updates},
          {"lr0", cfg.lr0},
          {"lr_decay", cfg.lr_decay},
          {"decay_every", cfg.decay_every},
          {"meta_batch", cfg.meta_batch},
          {"task_batch", cfg.task_batch},
          {"seed", cfg.seed},
          {"log_every", cfg.log_every},
          {"pooled", cfg.pooled},
          {"adam", {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"eps", cfg.adam.eps}}}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError("train config must be an object");
  try {
    c.total_updates = j.value("total_updates", c.total_updates);
    c.lr0 = j.value("lr0", c.lr0);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.decay_every = j.value("decay_every", c.decay_every);
    c.meta_batch = j.value("meta_batch", c.meta_batch);
    c.task_batch = j.value("task_batch", c.task_batch);
    c.seed = j.value("seed", c.seed);
    c.log_every = j.value("log_every", c.log_every);
    c.pooled = j.value("pooled", c.pooled);
    if (j.contains("adam")) {
      const json& a = j.at("adam");
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.eps = a.value("eps", c.adam.eps);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid train config: ") + e.what());
  }
  c.validate();
  return c;
}

json to_json(const RunRecord& r) {
  json hist = json::array();
  for (const auto& e : r.history) hist.push_back({{"step", e.step}, {"lr", e.lr}, {"loss", e.loss}});
  return {{"name", r.name},
          {"seed", r.seed},
          {"config", to_json(r.config)},
          {"effective_meta_batch", r.effective_meta_batch},
          {"updates", r.updates},
          {"wall_seconds", r.wall_seconds},
          {"history", hist}};
}

void write_loss_csv(const std::filesystem::path& path, const RunRecord& r) {
  CsvWriter w(path, {"step", "lr", "loss"});
  for (const auto& e : r.history) w.row({std::to_string(e.step), format_double(e.lr), format_double(e.loss)});
  w.close();
}

}  // namespace nff
