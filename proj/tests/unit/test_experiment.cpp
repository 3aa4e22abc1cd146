#include <doctest.h>

#include "nff/error.hpp"
#include "nff/experiment.hpp"

using namespace nff;

namespace {

ExperimentConfig tiny(ModelFamily family) {
  ExperimentConfig c;
  c.dataset.kind = DatasetKind::DS1;
  c.dataset.overrides = {{"meta_points", {3, 3, 2}}, {"task_points", {3, 4, 5}},
                         {"train_tasks", 4},         {"train_points", 12},
                         {"eval_tasks", 2}};
  c.model.family = family;
  c.model.layers = 3;
  c.model.nodes = 6;
  c.model.generator.width = 8;
  c.model.fictitious.n_tasks = 4;
  c.train.total_updates = 30;
  c.train.meta_batch = 2;
  c.train.task_batch = 8;
  c.eval.single_tasks = 2;
  return c;
}

}  // namespace

TEST_CASE("names parse case-insensitively and reject unknowns") {
  CHECK(parse_model_family("wgn") == ModelFamily::WGN);
  CHECK(parse_model_family("fMLP") == ModelFamily::fMLP);
  CHECK(parse_dataset_kind("sine6pt") == DatasetKind::Sine6pt);
  CHECK_THROWS_AS(parse_model_family("GAN"), ConfigError);
  CHECK_THROWS_AS(parse_dataset_kind("ds4"), ConfigError);
}

TEST_CASE("run names") {
  ExperimentConfig c;
  CHECK(c.run_name() == "WGN_(4L,16N)_ISLU1b_MB");
  c.model.meta_batch = false;
  CHECK(c.run_name() == "WGN_(4L,16N)_ISLU1b_ST");
  c.model.family = ModelFamily::fMLP;
  c.model.activation = ActivationSpec::of(ActivationKind::ISLU0);
  CHECK(c.run_name() == "fMLP_(4L,16N)_ISLU0");
}

TEST_CASE("experiment JSON round-trip and overrides") {
  const nlohmann::json j = {
      {"name", "demo"},
      {"seeds", {1, 2}},
      {"dataset", {{"kind", "ds3"}, {"seed", 9}, {"perturb", {{"mode", "noise"}, {"noise_pct", 2.0}}}}},
      {"model", {{"family", "ConcatGen"}, {"activation", "ELU"}, {"meta_batch", "ST"}, {"nodes", 8}}},
      {"train", {{"total_updates", 100}}},
      {"eval", {{"smoothness_orders", {1, 2}}}}};
  const ExperimentConfig c = experiment_from_json(j);
  CHECK(c.name == "demo");
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  CHECK(c.dataset.kind == DatasetKind::DS3);
  CHECK(c.dataset.seed == 9u);
  REQUIRE(c.dataset.perturb.has_value());
  CHECK(c.dataset.perturb->mode == PerturbMode::Noise);
  CHECK(c.model.family == ModelFamily::ConcatGen);
  CHECK_FALSE(c.model.meta_batch);
  CHECK(c.model.nodes == 8);
  CHECK(c.train.total_updates == 100);
  CHECK(c.eval.smoothness_orders == std::vector<int>{1, 2});
  CHECK(to_json(experiment_from_json(to_json(c))) == to_json(c));
}

TEST_CASE("experiment validation") {
  ExperimentConfig c = tiny(ModelFamily::fMLP);
  CHECK_NOTHROW(c.validate());
  c.dataset.kind = DatasetKind::Sine;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(ModelFamily::sWGN);
  c.dataset.kind = DatasetKind::Sine6pt;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(ModelFamily::WGN);
  c.eval.smoothness_orders = {3};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(ModelFamily::WGN);
  c.dataset.overrides["train_tasks"] = 100;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(experiment_from_json({{"model", {{"meta_batch", "XX"}}}}), ConfigError);
  CHECK_THROWS_AS(experiment_from_json({{"dataset", {{"perturb", {{"mode", "blur"}}}}}}), ConfigError);
}

TEST_CASE("prepare_data routes") {
  const PreparedData grid = prepare_data(tiny(ModelFamily::WGN), 3);
  CHECK(grid.dataset_name == "ds1");
  CHECK(grid.train.tasks.size() == 4);
  CHECK(grid.eval.tasks.size() == 2);
  CHECK(grid.eval.tasks[0].data.size() == 60);

  ExperimentConfig s = tiny(ModelFamily::sWGN);
  s.model.probe_count = 5;
  const PreparedData probed = prepare_data(s, 3);
  CHECK(probed.train.meta_dim() == 5);

  ExperimentConfig six = tiny(ModelFamily::WGN);
  six.dataset.kind = DatasetKind::Sine6pt;
  six.dataset.sine = {6, 2, 1001};
  const PreparedData p6 = prepare_data(six, 1);
  CHECK(p6.train.meta_dim() == 6);
  CHECK(p6.train.tasks.size() == 6);
  CHECK(p6.eval.tasks.at(0).data.size() == 1001);

  // Identical seeds give identical data; a fixed dataset seed decouples it from the run seed.
  const PreparedData again = prepare_data(tiny(ModelFamily::WGN), 3);
  CHECK(max_abs_diff(again.train.tasks[1].data.y, grid.train.tasks[1].data.y) == 0.0);
  ExperimentConfig fixed = tiny(ModelFamily::WGN);
  fixed.dataset.seed = 3;
  CHECK(prepare_data(fixed, 8).train.tasks[0].z == grid.train.tasks[0].z);
}

TEST_CASE("run_seed for each family") {
  for (ModelFamily f : {ModelFamily::WGN, ModelFamily::ConcatGen, ModelFamily::mMLP, ModelFamily::MLP,
                        ModelFamily::fMLP, ModelFamily::sWGN}) {
    CAPTURE(model_family_name(f));
    ExperimentConfig c = tiny(f);
    c.eval.smoothness_orders = {0};
    c.eval.smoothness.period = c.eval.smoothness.step = 0.05;
    c.eval.smoothness.off_axis_points = 2;
    const SeedResult r = run_seed(c, 1);
    CHECK(r.model_name == c.run_name());
    CHECK(r.models.size() == r.records.size());
    CHECK(r.eval_z.size() == r.models.size());
    CHECK(std::isfinite(r.score.mean));
    CHECK(r.score.mean > 0.0);
    REQUIRE(r.smoothness.size() == 1);
    CHECK(r.smoothness[0].score >= 0.0);
    const bool single = f == ModelFamily::MLP || f == ModelFamily::fMLP;
    CHECK(r.models.size() == (single ? 2u : 1u));
    CHECK(r.score.per_task.size() == (single ? 2u : 2u));
  }
}

TEST_CASE("run_seed is deterministic") {
  const ExperimentConfig c = tiny(ModelFamily::WGN);
  const SeedResult a = run_seed(c, 4), b = run_seed(c, 4);
  CHECK(a.score.mean == b.score.mean);
  CHECK(a.score.per_task == b.score.per_task);
}
