#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "nff/checkpoint.hpp"
#include "nff/csv.hpp"
#include "nff/dataset_io.hpp"
#include "nff/error.hpp"

using namespace nff;
namespace fs = std::filesystem;

namespace {

GridDatasetSpec tiny_spec() {
  GridDatasetSpec s = GridDatasetSpec::dataset1();
  s.meta_points = {3, 3, 2};
  s.task_points = {3, 4, 5};
  s.train_tasks = 5;
  s.train_points = 12;
  s.eval_tasks = 2;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_same(const MetaDataset& a, const MetaDataset& b) {
  REQUIRE(a.tasks.size() == b.tasks.size());
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    CHECK(a.tasks[i].z == b.tasks[i].z);
    CHECK(a.tasks[i].source_index == b.tasks[i].source_index);
    CHECK(max_abs_diff(a.tasks[i].data.x, b.tasks[i].data.x) == 0.0);
    CHECK(max_abs_diff(a.tasks[i].data.y, b.tasks[i].data.y) == 0.0);
  }
  CHECK(a.meta_names == b.meta_names);
  CHECK(a.input_names == b.input_names);
  CHECK(a.target_names == b.target_names);
}

}  // namespace

TEST_CASE("format_double round-trips exactly") {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-1, 1) * std::pow(10.0, static_cast<double>(rng.index(40)) - 20.0);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(3.0) == "3");
}

TEST_CASE("CSV writer and reader") {
  const fs::path dir = nff::test::scratch_dir("csv");
  {
    CsvWriter w(dir / "a.csv", {"name", "v"});
    w.row(std::vector<std::string>{"plain", "1"});
    w.row(std::vector<std::string>{"with,comma", "2.5"});
    w.row(std::vector<std::string>{"say \"hi\"", "-3"});
    CHECK_THROWS(w.row(std::vector<std::string>{"only one"}));
    w.close();
  }
  CHECK(slurp(dir / "a.csv").rfind("# format_version=1\nname,v\n", 0) == 0);
  const CsvTable t = read_csv(dir / "a.csv");
  CHECK(t.comments.at(0) == std::pair<std::string, std::string>{"format_version", "1"});
  CHECK(t.rows.at(1).at(0) == "with,comma");
  CHECK(t.rows.at(2).at(0) == "say \"hi\"");
  CHECK(t.numeric_column("v") == std::vector<double>{1, 2.5, -3});
  CHECK_THROWS_AS(t.column("missing"), DataError);
  CHECK_THROWS_AS(read_csv(dir / "none.csv"), DataError);
  std::ofstream(dir / "ragged.csv") << "a,b\n1,2\n3\n";
  CHECK_THROWS_AS(read_csv(dir / "ragged.csv"), DataError);
}

TEST_CASE("checkpoint round-trip is bit-exact for every model kind") {
  Rng rng(5);
  WgnConfig w;
  w.main = MlpConfig::from_pl_qn(3, 6, 3, 1, ActivationSpec::of(ActivationKind::ISLU1b));
  w.meta_dim = 3;
  ConcatGenConfig cg;
  cg.main = MlpConfig::from_pl_qn(3, 6, 3, 1, ActivationSpec::of(ActivationKind::ELU));
  cg.meta_dim = 3;
  std::vector<std::unique_ptr<Model>> models;
  models.push_back(std::make_unique<WgnModel>(w, rng));
  models.push_back(std::make_unique<ConcatGenModel>(cg, rng));
  models.push_back(
      std::make_unique<MlpModel>(MlpConfig::from_pl_qn(4, 5, 4, 1, ActivationSpec::of(ActivationKind::ISLU0)), 1, rng));
  const fs::path dir = nff::test::scratch_dir("ckpt");
  for (std::size_t i = 0; i < models.size(); ++i) {
    const Model& m = *models[i];
    const fs::path p = dir / ("m" + std::to_string(i) + ".json");
    save_checkpoint(p, m, {{"note", "x"}});
    const LoadedCheckpoint back = load_checkpoint(p);
    CHECK(back.model->kind() == m.kind());
    CHECK(back.run.at("note") == "x");
    const auto a = m.parameters();
    const auto b = back.model->parameters();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k]->name == b[k]->name);
      CHECK(max_abs_diff(a[k]->value, b[k]->value) == 0.0);
    }
    save_checkpoint(dir / "again.json", *back.model, {{"note", "x"}});
    CHECK(slurp(dir / "again.json") == slurp(p));
  }
}

TEST_CASE("checkpoint loading rejects missing, extra and mis-shaped parameters") {
  Rng rng(2);
  const MlpModel m(MlpConfig::from_pl_qn(2, 3, 1, 1, ActivationSpec::of(ActivationKind::ISLU0)), 0, rng);
  const nlohmann::json good = checkpoint_json(m);
  CHECK_NOTHROW(model_from_checkpoint(good));
  CHECK(good.at("format_version") == kCheckpointFormatVersion);

  nlohmann::json missing = good;
  missing["params"].erase(0);
  CHECK_THROWS_AS(model_from_checkpoint(missing), DataError);

  nlohmann::json extra = good;
  nlohmann::json bogus = good["params"][0];
  bogus["name"] = "bogus";
  extra["params"].push_back(bogus);
  CHECK_THROWS_AS(model_from_checkpoint(extra), DataError);

  nlohmann::json shape = good;
  shape["params"][0]["shape"] = {1, 1, 99};
  CHECK_THROWS_AS(model_from_checkpoint(shape), DataError);

  nlohmann::json version = good;
  version["format_version"] = 99;
  CHECK_THROWS_AS(model_from_checkpoint(version), DataError);

  const fs::path dir = nff::test::scratch_dir("badjson");
  std::ofstream(dir / "broken.json") << "{ nope";
  CHECK_THROWS_AS(read_json_file(dir / "broken.json"), DataError);
  CHECK_THROWS_AS(read_json_file(dir / "absent.json"), DataError);
}

TEST_CASE("config JSON round-trips") {
  WgnConfig w;
  w.main = MlpConfig::from_pl_qn(4, 16, 3, 1, ActivationSpec::of(ActivationKind::ISLU1b));
  w.meta_dim = 3;
  w.generate_activation = false;
  CHECK(to_json(wgn_config_from_json(to_json(w))) == to_json(w));
  ConcatGenConfig c;
  c.main = w.main;
  c.meta_dim = 3;
  CHECK(to_json(concat_gen_config_from_json(to_json(c))) == to_json(c));
  CHECK(to_json(activation_from_json(nlohmann::json("ELU"))) == to_json(ActivationSpec::of(ActivationKind::ELU)));
}

TEST_CASE("grid dataset write/load: full and split modes agree with the generator") {
  const GeneratedMetaData g = gen_dataset(tiny_spec(), 3);
  const fs::path full = nff::test::scratch_dir("full"), split = nff::test::scratch_dir("split");
  CHECK(write_generated_dataset(full, g, DatasetWriteMode::Full) == 18);
  CHECK(write_generated_dataset(split, g, DatasetWriteMode::Split) == 7);
  CHECK(fs::exists(full / "manifest.json"));

  for (const fs::path& d : {full, split}) {
    CAPTURE(d.string());
    const LoadedDataset l = load_dataset(d);
    require_same(l.train, g.train);
    require_same(l.eval, g.eval);
    CHECK(l.manifest.at("kind") == "grid");
    CHECK(l.manifest.at("seed") == 3);
    CHECK(l.manifest.at("dataset").at("name") == "ds1");
    REQUIRE(l.normalization.meta.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(l.normalization.meta[i].lo == g.normalization.meta[i].lo);
      CHECK(l.normalization.meta[i].hi == g.normalization.meta[i].hi);
    }
  }
  CHECK(load_dataset(full).manifest.at("mode") == "full");

  // Regenerating with the same seed writes identical bytes.
  const fs::path again = nff::test::scratch_dir("again");
  write_generated_dataset(again, gen_dataset(tiny_spec(), 3), DatasetWriteMode::Split);
  CHECK(slurp(again / "manifest.json") == slurp(split / "manifest.json"));
  CHECK(slurp(again / "train" / "0000.csv") == slurp(split / "train" / "0000.csv"));
}

TEST_CASE("grid spec JSON overrides") {
  const GridDatasetSpec s = grid_spec_from_json("ds2", {{"train_tasks", 7}, {"ranges", {{"B", {0.2, 0.4}}}}});
  CHECK(s.kind == GridDatasetKind::Pressure);
  CHECK(s.train_tasks == 7);
  CHECK(s.meta[0] == Range{0.2, 0.4});
  CHECK(to_json(grid_spec_from_json("ds2", to_json(s))) == to_json(s));
  CHECK_THROWS_AS(grid_spec_from_json("ds9", nlohmann::json::object()), ConfigError);
}

TEST_CASE("split and meta dataset writers") {
  auto [train, rec] = normalize(gen_sine_tasks(3, 11, std::nullopt, 1));
  const MetaDataset eval = normalize(gen_sine_tasks(2, 11, std::nullopt, 2)).first;
  const fs::path dir = nff::test::scratch_dir("sine");
  CHECK(write_split_dataset(dir, train, eval, rec, {{"dataset", "sine"}}) == 5);
  const LoadedDataset l = load_dataset(dir);
  require_same(l.train, train);
  require_same(l.eval, eval);
  CHECK(l.manifest.at("kind") == "meta");
  CHECK(l.manifest.at("dataset") == "sine");
  CHECK(l.normalization.inputs.size() == rec.inputs.size());

  const fs::path only = nff::test::scratch_dir("only_eval");
  CHECK(write_split_dataset(only, MetaDataset{}, eval, rec) == 2);
  const LoadedDataset le = load_dataset(only);
  CHECK(le.train.tasks.empty());
  CHECK(le.eval.tasks.size() == 2);

  const fs::path single = nff::test::scratch_dir("single");
  CHECK(write_meta_dataset(single, train, "train") == 3);
  require_same(load_dataset(single).train, train);
}

TEST_CASE("dataset loading errors are data errors") {
  const fs::path dir = nff::test::scratch_dir("broken_ds");
  CHECK_THROWS_AS(load_dataset(dir), DataError);
  write_meta_dataset(dir, normalize(gen_sine_tasks(1, 6, std::nullopt, 1)).first, "train");
  fs::remove(dir / "train" / "0000.csv");
  CHECK_THROWS_AS(load_dataset(dir), DataError);
}
