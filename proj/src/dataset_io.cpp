#include "nff/dataset_io.hpp"

#include <cstdio>

#include "nff/checkpoint.hpp"
#include "nff/csv.hpp"
#include "nff/error.hpp"

namespace nff {

using nlohmann::json;

namespace {

const char* kMetaKeys[] = {"B", "k", "m"};
const char* kTaskKeys[] = {"L", "t", "phi"};

std::string task_file(const std::string& split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.csv", index);
  return split + "/" + buf;
}

std::vector<std::string> columns(const MetaDataset& md) {
  std::vector<std::string> h = md.input_names;
  h.insert(h.end(), md.target_names.begin(), md.target_names.end());
  return h;
}

void write_task_csv(const std::filesystem::path& path, const TaskDataset& d, const std::vector<std::string>& header) {
  CsvWriter w(path, header);
  const std::size_t dx = d.input_dim(), dy = d.output_dim();
  std::vector<double> row(dx + dy);
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (std::size_t c = 0; c < dx; ++c) row[c] = d.x(0, r, c);
    for (std::size_t c = 0; c < dy; ++c) row[dx + c] = d.y(0, r, c);
    w.row(row);
  }
  w.close();
}

TaskDataset read_task_csv(const std::filesystem::path& path, const std::vector<std::string>& inputs,
                          const std::vector<std::string>& targets, const std::vector<std::size_t>* rows) {
  const CsvTable t = read_csv(path);
  std::vector<std::vector<double>> in_cols, out_cols;
  for (const auto& n : inputs) in_cols.push_back(t.numeric_column(n));
  for (const auto& n : targets) out_cols.push_back(t.numeric_column(n));
  const std::size_t n_all = t.rows.size();
  const std::size_t n = rows ? rows->size() : n_all;
  TaskDataset d{Tensor3({1, n, inputs.size()}), Tensor3({1, n, targets.size()})};
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t src = rows ? (*rows)[r] : r;
    if (src >= n_all) throw DataError(path.string() + ": row index " + std::to_string(src) + " out of range");
    for (std::size_t c = 0; c < inputs.size(); ++c) d.x(0, r, c) = in_cols[c][src];
    for (std::size_t c = 0; c < targets.size(); ++c) d.y(0, r, c) = out_cols[c][src];
  }
  return d;
}

json split_entries(const MetaDataset& md, const std::string& split) {
  json entries = json::array();
  for (std::size_t i = 0; i < md.tasks.size(); ++i) {
    entries.push_back({{"file", task_file(split, i)}, {"z", md.tasks[i].z}, {"source_index", md.tasks[i].source_index}});
  }
  return entries;
}

json names_json(const MetaDataset& md) {
  return {{"meta_names", md.meta_names}, {"input_names", md.input_names}, {"target_names", md.target_names}};
}

json ranges_json(const std::vector<Range>& r) {
  json a = json::array();
  for (const auto& x : r) a.push_back({x.lo, x.hi});
  return a;
}

std::vector<Range> ranges_from_json(const json& j) {
  std::vector<Range> r;
  for (const auto& x : j) r.push_back({x.at(0).get<double>(), x.at(1).get<double>()});
  return r;
}

Range range_override(const json& j, const std::string& key, Range fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2) throw ConfigError("range '" + key + "' must be [lo, hi]");
  return {v.at(0).get<double>(), v.at(1).get<double>()};
}

}  // namespace

json to_json(const GridDatasetSpec& spec) {
  json ranges = json::object();
  for (std::size_t i = 0; i < 3; ++i) {
    ranges[kMetaKeys[i]] = {spec.meta[i].lo, spec.meta[i].hi};
    ranges[kTaskKeys[i]] = {spec.task[i].lo, spec.task[i].hi};
  }
  return {{"name", spec.name()},
          {"ranges", ranges},
          {"meta_points", spec.meta_points},
          {"task_points", spec.task_points},
          {"g", spec.g},
          {"train_tasks", spec.train_tasks},
          {"train_points", spec.train_points},
          {"eval_tasks", spec.eval_tasks}};
}

GridDatasetSpec grid_spec_from_json(const std::string& name, const json& j) {
  GridDatasetSpec s;
  if (name == "ds1") {
    s = GridDatasetSpec::dataset1();
  } else if (name == "ds2") {
    s = GridDatasetSpec::dataset2();
  } else if (name == "ds3") {
    s = GridDatasetSpec::dataset3();
  } else {
    throw ConfigError("unknown grid dataset '" + name + "' (valid: ds1, ds2, ds3)");
  }
  if (j.is_null()) return s;
  try {
    const json ranges = j.value("ranges", json::object());
    for (std::size_t i = 0; i < 3; ++i) {
      s.meta[i] = range_override(ranges, kMetaKeys[i], s.meta[i]);
      s.task[i] = range_override(ranges, kTaskKeys[i], s.task[i]);
    }
    s.meta_points = j.value("meta_points", s.meta_points);
    s.task_points = j.value("task_points", s.task_points);
    s.g = j.value("g", s.g);
    s.train_tasks = j.value("train_tasks", s.train_tasks);
    s.train_points = j.value("train_points", s.train_points);
    s.eval_tasks = j.value("eval_tasks", s.eval_tasks);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid dataset overrides: ") + e.what());
  }
  s.validate();
  return s;
}

json to_json(const NormalizationRecord& rec, const MetaDataset& md) {
  auto group = [](const std::vector<AffineMap>& maps, const std::vector<std::string>& names) {
    json a = json::array();
    for (std::size_t i = 0; i < maps.size(); ++i) {
      a.push_back({{"name", i < names.size() ? names[i] : ""}, {"lo", maps[i].lo}, {"hi", maps[i].hi}});
    }
    return a;
  };
  return {{"inputs", group(rec.inputs, md.input_names)}, {"meta", group(rec.meta, md.meta_names)}};
}

NormalizationRecord normalization_from_json(const json& j) {
  NormalizationRecord rec;
  for (const auto& e : j.value("inputs", json::array())) rec.inputs.push_back({e.at("lo"), e.at("hi")});
  for (const auto& e : j.value("meta", json::array())) rec.meta.push_back({e.at("lo"), e.at("hi")});
  return rec;
}

std::size_t write_generated_dataset(const std::filesystem::path& dir, const GeneratedMetaData& data,
                                    DatasetWriteMode mode) {
  std::filesystem::create_directories(dir);
  const std::vector<std::string> header = columns(data.train);
  json manifest = {{"format_version", kManifestFormatVersion},
                   {"kind", "grid"},
                   {"dataset", to_json(data.spec)},
                   {"seed", data.seed},
                   {"mode", mode == DatasetWriteMode::Full ? "full" : "split"},
                   {"normalization", to_json(data.normalization, data.train)},
                   {"meta_ranges", ranges_json(data.train.meta_ranges)},
                   {"input_ranges", ranges_json(data.train.input_ranges)}};
  manifest.update(names_json(data.train));

  std::size_t files = 0;
  json train = split_entries(data.train, "train");
  json eval = split_entries(data.eval, "eval");
  if (mode == DatasetWriteMode::Full) {
    for (std::size_t k = 0; k < data.full.size(); ++k) {
      TaskDataset d = data.full.task(k);
      for (std::size_t r = 0; r < d.size(); ++r) {
        for (std::size_t c = 0; c < data.normalization.inputs.size(); ++c) {
          d.x(0, r, c) = data.normalization.inputs[c].forward(d.x(0, r, c));
        }
      }
      write_task_csv(dir / task_file("grid", k), d, header);
      ++files;
    }
    for (std::size_t i = 0; i < train.size(); ++i) {
      train[i]["file"] = task_file("grid", data.train_indices[i]);
      train[i]["rows"] = data.train_points[i];
    }
    for (std::size_t i = 0; i < eval.size(); ++i) eval[i]["file"] = task_file("grid", data.eval_indices[i]);
  } else {
    for (std::size_t i = 0; i < data.train.tasks.size(); ++i) {
      write_task_csv(dir / task_file("train", i), data.train.tasks[i].data, header);
      ++files;
    }
    for (std::size_t i = 0; i < data.eval.tasks.size(); ++i) {
      write_task_csv(dir / task_file("eval", i), data.eval.tasks[i].data, header);
      ++files;
    }
  }
  manifest["splits"] = {{"train", train}, {"eval", eval}};
  write_json_file(dir / "manifest.json", manifest);
  return files;
}

std::size_t write_split_dataset(const std::filesystem::path& dir, const MetaDataset& train, const MetaDataset& eval,
                                const NormalizationRecord& normalization, const json& extra) {
  std::filesystem::create_directories(dir);
  const auto header = columns(train.tasks.empty() ? eval : train);
  json splits = json::object();
  std::size_t files = 0;
  for (auto [name, md] : {std::pair{"train", &train}, std::pair{"eval", &eval}}) {
    if (md->tasks.empty()) continue;
    if (columns(*md) != header) throw DataError("train and eval splits have different columns");
    for (std::size_t i = 0; i < md->tasks.size(); ++i) {
      write_task_csv(dir / task_file(name, i), md->tasks[i].data, header);
      ++files;
    }
    splits[name] = split_entries(*md, name);
  }
  const MetaDataset& names = train.tasks.empty() ? eval : train;
  json manifest = {{"format_version", kManifestFormatVersion},
                   {"kind", "meta"},
                   {"meta_ranges", ranges_json(names.meta_ranges)},
                   {"input_ranges", ranges_json(names.input_ranges)},
                   {"normalization", to_json(normalization, names)},
                   {"splits", splits}};
  manifest.update(names_json(names));
  manifest.update(extra);
  write_json_file(dir / "manifest.json", manifest);
  return files;
}

std::size_t write_meta_dataset(const std::filesystem::path& dir, const MetaDataset& md, const std::string& split,
                               const json& extra) {
  std::filesystem::create_directories(dir);
  const auto header = columns(md);
  for (std::size_t i = 0; i < md.tasks.size(); ++i) write_task_csv(dir / task_file(split, i), md.tasks[i].data, header);
  json manifest = {{"format_version", kManifestFormatVersion},
                   {"kind", "meta"},
                   {"meta_ranges", ranges_json(md.meta_ranges)},
                   {"input_ranges", ranges_json(md.input_ranges)},
                   {"normalization", {{"inputs", json::array()}, {"meta", json::array()}}},
                   {"splits", {{split, split_entries(md, split)}}}};
  manifest.update(names_json(md));
  manifest.update(extra);
  write_json_file(dir / "manifest.json", manifest);
  return md.tasks.size();
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  LoadedDataset out;
  out.manifest = read_json_file(dir / "manifest.json");
  const json& m = out.manifest;
  try {
    if (m.at("format_version").get<int>() != kManifestFormatVersion) {
      throw DataError("unsupported manifest format_version");
    }
    MetaDataset skeleton;
    skeleton.meta_names = m.at("meta_names").get<std::vector<std::string>>();
    skeleton.input_names = m.at("input_names").get<std::vector<std::string>>();
    skeleton.target_names = m.at("target_names").get<std::vector<std::string>>();
    skeleton.meta_ranges = ranges_from_json(m.value("meta_ranges", json::array()));
    skeleton.input_ranges = ranges_from_json(m.value("input_ranges", json::array()));
    out.normalization = normalization_from_json(m.value("normalization", json::object()));
    out.train = skeleton;
    out.eval = skeleton;
    const json splits = m.at("splits");
    for (auto [name, target] : {std::pair{"train", &out.train}, std::pair{"eval", &out.eval}}) {
      if (!splits.contains(name)) continue;
      for (const json& e : splits.at(name)) {
        MetaTask t;
        t.z = e.at("z").get<std::vector<double>>();
        t.source_index = e.value("source_index", std::size_t{0});
        std::vector<std::size_t> rows;
        const bool has_rows = e.contains("rows");
        if (has_rows) rows = e.at("rows").get<std::vector<std::size_t>>();
        t.data = read_task_csv(dir / e.at("file").get<std::string>(), skeleton.input_names, skeleton.target_names,
                               has_rows ? &rows : nullptr);
        target->tasks.push_back(std::move(t));
      }
      target->validate();
    }
  } catch (const json::exception& e) {
    throw DataError((dir / "manifest.json").string() + ": " + e.what());
  }
  return out;
}

}  // namespace nff
