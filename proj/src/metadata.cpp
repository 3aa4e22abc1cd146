#include "nff/metadata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nff/error.hpp"
#include "nff/random.hpp"

namespace nff {

namespace {

std::vector<double> linspace(const Range& r, std::size_t n) {
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = r.lo;
    return v;
  }
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  v[n - 1] = r.hi;
  return v;
}

void check_range(const Range& r, const std::string& name) {
  if (!std::isfinite(r.lo) || !std::isfinite(r.hi) || r.hi <= r.lo) {
    std::ostringstream os;
    os << "degenerate range for " << name << ": [" << r.lo << ", " << r.hi << "]";
    throw DataError(os.str());
  }
}

std::vector<AffineMap> maps_for(const std::vector<Range>& ranges, const std::vector<std::string>& names,
                                std::size_t dim, const char* group) {
  std::vector<AffineMap> maps;
  if (ranges.empty()) return maps;
  if (ranges.size() != dim) {
    throw DataError(std::string(group) + " range count " + std::to_string(ranges.size()) +
                    " does not match dimension " + std::to_string(dim));
  }
  for (std::size_t i = 0; i < dim; ++i) {
    check_range(ranges[i], i < names.size() ? names[i] : std::string(group) + std::to_string(i));
    maps.push_back({ranges[i].lo, ranges[i].hi});
  }
  return maps;
}

void map_columns(Tensor3& x, const std::vector<AffineMap>& maps, bool inverse) {
  if (maps.empty()) return;
  const std::size_t d = x.shape().d2;
  if (maps.size() != d) throw DataError("normalization record does not match input width");
  const std::size_t rows = x.size() / d;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      double& v = x[r * d + c];
      v = inverse ? maps[c].inverse(v) : maps[c].forward(v);
    }
  }
}

void map_meta(std::vector<double>& z, const std::vector<AffineMap>& maps, bool inverse) {
  if (maps.empty()) return;
  if (maps.size() != z.size()) throw DataError("normalization record does not match meta dimension");
  for (std::size_t c = 0; c < z.size(); ++c) z[c] = inverse ? maps[c].inverse(z[c]) : maps[c].forward(z[c]);
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// Rejects ranges for which dataset <2>'s logarithms are undefined anywhere on the grid.
void check_pressure_domain(const MetaGrid& grid) {
  const GridDatasetSpec& s = grid.spec();
  const std::size_t per_b = s.meta_points[1] * s.meta_points[2];
  for (std::size_t ib = 0; ib < s.meta_points[0]; ++ib) {
    const std::size_t k = ib * per_b;
    const double B = grid.meta(k)[0];
    for (std::size_t i = 0; i < grid.points_per_task(); ++i) {
      const auto [L, t, phi] = grid.input(i);
      const double gap = t - B * L;
      if (!(gap > 0) || !(t > 0) || !(phi > 0)) {
        std::ostringstream os;
        os << s.name() << " log-domain violation at meta row " << k << ", task row " << i << " (B=" << fmt_double(B)
           << ", L=" << fmt_double(L) << ", t=" << fmt_double(t) << ", phi=" << fmt_double(phi)
           << "): requires t - B*L > 0 and phi > 0, got t - B*L = " << fmt_double(gap);
        throw DataError(os.str());
      }
    }
  }
}

MetaTask grid_task(const MetaGrid& grid, std::size_t k, std::span<const std::size_t> points) {
  MetaTask task;
  const auto z = grid.meta(k);
  task.z.assign(z.begin(), z.end());
  task.data = points.empty() ? grid.task(k) : grid.task(k, points);
  task.source_index = k;
  return task;
}

}  // namespace

void TaskDataset::validate() const {
  if (x.shape().d0 != 1 || y.shape().d0 != 1) throw DataError("task data must have d0 = 1");
  if (x.shape().d1 != y.shape().d1) {
    throw DataError("task row count mismatch: x has " + std::to_string(x.shape().d1) + " rows, y has " +
                    std::to_string(y.shape().d1));
  }
  if (!all_finite(x) || !all_finite(y)) throw DataError("task data contains non-finite values");
}

std::size_t MetaDataset::min_task_size() const {
  std::size_t n = std::numeric_limits<std::size_t>::max();
  for (const auto& t : tasks) n = std::min(n, t.data.size());
  return tasks.empty() ? 0 : n;
}

void MetaDataset::validate() const {
  if (tasks.empty()) return;
  const std::size_t nz = tasks.front().z.size();
  const std::size_t dx = tasks.front().data.input_dim();
  const std::size_t dy = tasks.front().data.output_dim();
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    const auto& t = tasks[k];
    if (t.z.size() != nz || t.data.input_dim() != dx || t.data.output_dim() != dy) {
      throw DataError("task " + std::to_string(k) + " has inconsistent dimensions");
    }
    for (double v : t.z) {
      if (!std::isfinite(v)) throw DataError("task " + std::to_string(k) + " has a non-finite metaparameter");
    }
    t.data.validate();
  }
}

GridDatasetSpec GridDatasetSpec::dataset1() {
  GridDatasetSpec s;
  s.kind = GridDatasetKind::Spring;
  s.meta = {Range{0.5, 1.5}, Range{2.0, 5.0}, Range{0.5, 2.5}};
  s.task = {Range{1.0, 4.0}, Range{0.1, 2.0}, Range{0.0, 0.78}};
  return s;
}

GridDatasetSpec GridDatasetSpec::dataset2() {
  GridDatasetSpec s;
  s.kind = GridDatasetKind::Pressure;
  s.meta = {Range{1.0, 10.0}, Range{5.0, 20.0}, Range{1.0, 20.0}};
  s.task = {Range{1.0, 8.0}, Range{100.0, 150.0}, Range{2.0, 20.0}};
  return s;
}

GridDatasetSpec GridDatasetSpec::dataset3() {
  GridDatasetSpec s;
  s.kind = GridDatasetKind::Trig;
  s.meta = {Range{-0.4, 0.4}, Range{1.0, 1.5}, Range{0.2, 1.0}};
  s.task = {Range{0.0, 1.4}, Range{0.0, 1.4}, Range{1.0, 1.5}};
  return s;
}

double GridDatasetSpec::target(double B, double k, double m, double L, double t, double phi) const {
  switch (kind) {
    case GridDatasetKind::Spring: {
      const double omega = std::sqrt((k * g + (B - 0.3) * (B - 0.3)) / (k * L + k * m));
      return std::sqrt(B) * std::cos(omega * t + phi);
    }
    case GridDatasetKind::Pressure:
      return -m * g / (B * k) * std::log(t / (t - B * L)) + std::log(phi);
    case GridDatasetKind::Trig: {
      const double c = std::cos(phi * L + m);
      return B * std::sin(k * t + B) + m * c * c;
    }
  }
  throw ContractError("unhandled dataset kind");
}

std::string GridDatasetSpec::name() const { return "ds" + std::to_string(static_cast<int>(kind)); }

void GridDatasetSpec::validate() const {
  static const char* meta_names[] = {"B", "k", "m"};
  static const char* task_names[] = {"L", "t", "phi"};
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      check_range(meta[i], meta_names[i]);
      check_range(task[i], task_names[i]);
    } catch (const DataError& e) {
      throw ConfigError(name() + ": " + e.what());
    }
    if (meta_points[i] < 2 || task_points[i] < 2) throw ConfigError(name() + ": grid axes need at least 2 points");
  }
  if (!(g > 0)) throw ConfigError(name() + ": g must be positive");
  if (train_tasks + eval_tasks > meta_grid_size()) {
    throw ConfigError(name() + ": train_tasks + eval_tasks exceeds the metaparameter grid (" +
                      std::to_string(meta_grid_size()) + ")");
  }
  if (train_tasks == 0) throw ConfigError(name() + ": train_tasks must be positive");
  if (train_points == 0 || train_points > task_grid_size()) {
    throw ConfigError(name() + ": train_points must be in [1, " + std::to_string(task_grid_size()) + "]");
  }
}

MetaGrid::MetaGrid(GridDatasetSpec spec) : spec_(std::move(spec)) {
  for (std::size_t i = 0; i < 3; ++i) {
    meta_axes_[i] = linspace(spec_.meta[i], spec_.meta_points[i]);
    task_axes_[i] = linspace(spec_.task[i], spec_.task_points[i]);
  }
}

std::array<double, 3> MetaGrid::meta(std::size_t k) const {
  if (k >= size()) throw DataError("meta grid index " + std::to_string(k) + " out of range");
  const std::size_t nk = spec_.meta_points[1], nm = spec_.meta_points[2];
  return {meta_axes_[0][k / (nk * nm)], meta_axes_[1][(k / nm) % nk], meta_axes_[2][k % nm]};
}

std::array<double, 3> MetaGrid::input(std::size_t i) const {
  if (i >= points_per_task()) throw DataError("task grid index " + std::to_string(i) + " out of range");
  const std::size_t nt = spec_.task_points[1], np = spec_.task_points[2];
  return {task_axes_[0][i / (nt * np)], task_axes_[1][(i / np) % nt], task_axes_[2][i % np]};
}

double MetaGrid::target(std::size_t k, std::size_t i) const {
  const auto [B, kk, m] = meta(k);
  const auto [L, t, phi] = input(i);
  return spec_.target(B, kk, m, L, t, phi);
}

TaskDataset MetaGrid::task(std::size_t k) const {
  std::vector<std::size_t> all(points_per_task());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return task(k, all);
}

TaskDataset MetaGrid::task(std::size_t k, std::span<const std::size_t> points) const {
  const auto [B, kk, m] = meta(k);
  TaskDataset d{Tensor3({1, points.size(), 3}), Tensor3({1, points.size(), 1})};
  for (std::size_t r = 0; r < points.size(); ++r) {
    const auto [L, t, phi] = input(points[r]);
    d.x(0, r, 0) = L;
    d.x(0, r, 1) = t;
    d.x(0, r, 2) = phi;
    d.y(0, r, 0) = spec_.target(B, kk, m, L, t, phi);
  }
  return d;
}

std::pair<MetaDataset, NormalizationRecord> normalize(const MetaDataset& md) {
  NormalizationRecord rec;
  rec.inputs = maps_for(md.input_ranges, md.input_names, md.input_dim(), "input");
  rec.meta = maps_for(md.meta_ranges, md.meta_names, md.meta_dim(), "meta");
  MetaDataset out = md;
  for (auto& t : out.tasks) {
    map_columns(t.data.x, rec.inputs, false);
    map_meta(t.z, rec.meta, false);
  }
  return {std::move(out), std::move(rec)};
}

MetaDataset denormalize(const MetaDataset& md, const NormalizationRecord& record) {
  MetaDataset out = md;
  for (auto& t : out.tasks) {
    map_columns(t.data.x, record.inputs, true);
    map_meta(t.z, record.meta, true);
  }
  return out;
}

std::vector<double> normalize_meta(std::span<const double> z, const NormalizationRecord& record) {
  std::vector<double> out(z.begin(), z.end());
  map_meta(out, record.meta, false);
  return out;
}

MetaDataset grid_dataset_skeleton(const GridDatasetSpec& spec) {
  MetaDataset md;
  md.meta_names = {"B", "k", "m"};
  md.input_names = {"L", "t", "phi"};
  md.target_names = {spec.kind == GridDatasetKind::Spring ? "theta" : "y"};
  md.meta_ranges.assign(spec.meta.begin(), spec.meta.end());
  md.input_ranges.assign(spec.task.begin(), spec.task.end());
  return md;
}

GeneratedMetaData gen_dataset(const GridDatasetSpec& spec, std::uint64_t seed) {
  spec.validate();
  MetaGrid grid(spec);
  if (spec.kind == GridDatasetKind::Pressure) check_pressure_domain(grid);

  Rng split_rng(derive_seed(seed, 0));
  const auto picks = split_rng.sample_without_replacement(grid.size(), spec.train_tasks + spec.eval_tasks);
  std::vector<std::size_t> train_idx(picks.begin(), picks.begin() + static_cast<long>(spec.train_tasks));
  std::vector<std::size_t> eval_idx(picks.begin() + static_cast<long>(spec.train_tasks), picks.end());

  MetaDataset train = grid_dataset_skeleton(spec);
  MetaDataset eval = grid_dataset_skeleton(spec);
  std::vector<std::vector<std::size_t>> train_points;
  for (std::size_t k : train_idx) {
    Rng point_rng(derive_seed(seed, 1 + k));
    auto points = point_rng.sample_without_replacement(grid.points_per_task(), spec.train_points);
    std::sort(points.begin(), points.end());
    train.tasks.push_back(grid_task(grid, k, points));
    train_points.push_back(std::move(points));
  }
  for (std::size_t k : eval_idx) eval.tasks.push_back(grid_task(grid, k, {}));
  try {
    train.validate();
    eval.validate();
  } catch (const DataError& e) {
    throw DataError(spec.name() + ": " + e.what());
  }

  auto [train_n, rec] = normalize(train);
  auto eval_n = normalize(eval).first;
  return GeneratedMetaData{spec,
                           seed,
                           std::move(grid),
                           std::move(train_n),
                           std::move(eval_n),
                           std::move(rec),
                           std::move(train_idx),
                           std::move(eval_idx),
                           std::move(train_points)};
}

namespace {
GeneratedMetaData gen_checked(const GridDatasetSpec& spec, std::uint64_t seed, GridDatasetKind kind) {
  if (spec.kind != kind) throw ConfigError("dataset spec kind does not match generator " + spec.name());
  return gen_dataset(spec, seed);
}
}  // namespace

GeneratedMetaData gen_dataset1(const GridDatasetSpec& spec, std::uint64_t seed) {
  return gen_checked(spec, seed, GridDatasetKind::Spring);
}
GeneratedMetaData gen_dataset2(const GridDatasetSpec& spec, std::uint64_t seed) {
  return gen_checked(spec, seed, GridDatasetKind::Pressure);
}
GeneratedMetaData gen_dataset3(const GridDatasetSpec& spec, std::uint64_t seed) {
  return gen_checked(spec, seed, GridDatasetKind::Trig);
}

std::vector<double> six_point_positions() { return {0.26, 1.54, 2.30, 3.84, 7.69, 8.97}; }

MetaDataset gen_sine_tasks(std::size_t n_tasks, std::size_t pts_per_task,
                           const std::optional<std::vector<double>>& x_positions, std::uint64_t seed,
                           const SineRanges& ranges) {
  const std::vector<double> xs = x_positions ? *x_positions : linspace(ranges.x, pts_per_task);
  if (xs.empty()) throw ConfigError("sine tasks need at least one x position");
  MetaDataset md;
  md.meta_names = {"A", "p", "phi"};
  md.input_names = {"x"};
  md.target_names = {"y"};
  md.meta_ranges = {ranges.amplitude, ranges.frequency, ranges.phase};
  md.input_ranges = {ranges.x};
  for (std::size_t k = 0; k < n_tasks; ++k) {
    Rng rng(derive_seed(seed, k));
    const double A = rng.uniform(ranges.amplitude.lo, ranges.amplitude.hi);
    const double p = rng.uniform(ranges.frequency.lo, ranges.frequency.hi);
    const double phi = rng.uniform(ranges.phase.lo, ranges.phase.hi);
    MetaTask t;
    t.z = {A, p, phi};
    t.source_index = k;
    t.data = {Tensor3({1, xs.size(), 1}), Tensor3({1, xs.size(), 1})};
    for (std::size_t i = 0; i < xs.size(); ++i) {
      t.data.x[i] = xs[i];
      t.data.y[i] = A * std::sin(p * xs[i] + phi);
    }
    md.tasks.push_back(std::move(t));
  }
  return md;
}

std::vector<double> FictitiousSpec::labels() const {
  std::vector<double> a(n_tasks);
  const long half = static_cast<long>(n_tasks / 2);
  for (std::size_t j = 0; j < n_tasks; ++j) a[j] = static_cast<double>(static_cast<long>(j) - half) * label_step;
  return a;
}

MetaDataset fictitious_augment(const TaskDataset& task, const FictitiousSpec& spec) {
  if (spec.n_tasks == 0) throw ConfigError("fictitious augmentation needs at least one task");
  if (!(spec.label_step > 0)) throw ConfigError("fictitious label_step must be positive");
  if (spec.shift_axis == ShiftAxis::Y && task.output_dim() != 1) {
    throw DataError("y-shift augmentation requires d_y = 1");
  }
  if (spec.shift_axis == ShiftAxis::X && spec.x_column >= task.input_dim()) {
    throw DataError("x-shift column out of range");
  }
  MetaDataset md;
  md.meta_names = {"a"};
  const auto labels = spec.labels();
  const long half = static_cast<long>(spec.n_tasks / 2);
  for (std::size_t j = 0; j < spec.n_tasks; ++j) {
    const double shift = static_cast<double>(static_cast<long>(j) - half) * spec.y_shift_per_step;
    MetaTask t;
    t.z = {labels[j]};
    t.data = task;
    t.source_index = j;
    if (shift != 0.0) {
      if (spec.shift_axis == ShiftAxis::Y) {
        for (double& v : t.data.y.data()) v += shift;
      } else {
        const std::size_t d = task.input_dim();
        for (std::size_t r = 0; r < task.size(); ++r) t.data.x[r * d + spec.x_column] += shift;
      }
    }
    md.tasks.push_back(std::move(t));
  }
  return md;
}

std::vector<double> probe_values(const TaskDataset& task, std::span<const std::vector<double>> probes,
                                 double tolerance) {
  const std::size_t d = task.input_dim();
  const std::size_t dy = task.output_dim();
  std::vector<double> out;
  out.reserve(probes.size() * dy);
  for (std::size_t p = 0; p < probes.size(); ++p) {
    if (probes[p].size() != d) throw DataError("probe " + std::to_string(p) + " has the wrong input width");
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_row = 0;
    for (std::size_t r = 0; r < task.size(); ++r) {
      double dist = 0.0;
      for (std::size_t c = 0; c < d; ++c) dist = std::max(dist, std::abs(task.x[r * d + c] - probes[p][c]));
      if (dist < best) {
        best = dist;
        best_row = r;
      }
    }
    if (!(best <= tolerance)) {
      std::ostringstream os;
      os << "probe " << p << " has no sample within tolerance " << tolerance << " (nearest distance " << best << ")";
      throw DataError(os.str());
    }
    for (std::size_t c = 0; c < dy; ++c) out.push_back(task.y[best_row * dy + c]);
  }
  return out;
}

MetaDataset value_metaparams(const MetaDataset& md, std::span<const std::vector<double>> probes, double tolerance) {
  MetaDataset out = md;
  out.meta_names.clear();
  for (std::size_t p = 0; p < probes.size(); ++p) {
    for (std::size_t c = 0; c < md.output_dim(); ++c) {
      out.meta_names.push_back("y@" + std::to_string(p) + (md.output_dim() > 1 ? "." + std::to_string(c) : ""));
    }
  }
  out.meta_ranges.clear();
  for (auto& t : out.tasks) t.z = probe_values(t.data, probes, tolerance);
  return out;
}

std::vector<std::size_t> draw_probe_points(std::size_t grid_points, std::size_t probe_count, std::uint64_t seed) {
  if (probe_count == 0 || probe_count > grid_points) {
    throw ConfigError("probe_count must be in [1, " + std::to_string(grid_points) + "]");
  }
  Rng rng(derive_seed(seed, 0x70726f6265ULL));
  auto pts = rng.sample_without_replacement(grid_points, probe_count);
  std::sort(pts.begin(), pts.end());
  return pts;
}

MetaDataset value_metaparams(const MetaDataset& md, std::size_t probe_count, std::uint64_t seed, double tolerance) {
  if (md.tasks.empty()) throw DataError("value_metaparams needs at least one task");
  const TaskDataset& first = md.tasks.front().data;
  const std::size_t d = first.input_dim();
  std::vector<std::vector<double>> probes;
  for (std::size_t r : draw_probe_points(first.size(), probe_count, seed)) {
    probes.emplace_back(first.x.data().begin() + static_cast<long>(r * d),
                        first.x.data().begin() + static_cast<long>((r + 1) * d));
  }
  return value_metaparams(md, probes, tolerance);
}

void relabel_with_grid_probes(GeneratedMetaData& data, std::size_t probe_count, std::uint64_t seed) {
  const auto points = draw_probe_points(data.full.points_per_task(), probe_count, seed);
  std::vector<std::string> names;
  for (std::size_t p = 0; p < points.size(); ++p) names.push_back("y@" + std::to_string(points[p]));
  for (MetaDataset* md : {&data.train, &data.eval}) {
    md->meta_names = names;
    md->meta_ranges.clear();
    for (auto& t : md->tasks) {
      t.z.clear();
      for (std::size_t p : points) t.z.push_back(data.full.target(t.source_index, p));
    }
  }
  data.normalization.meta.clear();
}

TaskDataset meta_input_join(const MetaDataset& md) {
  std::size_t rows = 0;
  for (const auto& t : md.tasks) rows += t.data.size();
  const std::size_t dx = md.input_dim(), nz = md.meta_dim(), dy = md.output_dim();
  TaskDataset out{Tensor3({1, rows, dx + nz}), Tensor3({1, rows, dy})};
  std::size_t r = 0;
  for (const auto& t : md.tasks) {
    for (std::size_t i = 0; i < t.data.size(); ++i, ++r) {
      for (std::size_t c = 0; c < dx; ++c) out.x(0, r, c) = t.data.x(0, i, c);
      for (std::size_t c = 0; c < nz; ++c) out.x(0, r, dx + c) = t.z[c];
      for (std::size_t c = 0; c < dy; ++c) out.y(0, r, c) = t.data.y(0, i, c);
    }
  }
  return out;
}

MetaDataset subsample_points(const MetaDataset& md, std::size_t n_points, std::uint64_t seed) {
  MetaDataset out = md;
  for (std::size_t k = 0; k < out.tasks.size(); ++k) {
    const TaskDataset& src = md.tasks[k].data;
    if (n_points > src.size()) {
      throw DataError("task " + std::to_string(k) + " has " + std::to_string(src.size()) + " points, " +
                      std::to_string(n_points) + " requested");
    }
    Rng rng(derive_seed(seed, k));
    auto rows = rng.sample_without_replacement(src.size(), n_points);
    std::sort(rows.begin(), rows.end());
    const std::size_t dx = src.input_dim(), dy = src.output_dim();
    TaskDataset d{Tensor3({1, n_points, dx}), Tensor3({1, n_points, dy})};
    for (std::size_t r = 0; r < n_points; ++r) {
      for (std::size_t c = 0; c < dx; ++c) d.x(0, r, c) = src.x(0, rows[r], c);
      for (std::size_t c = 0; c < dy; ++c) d.y(0, r, c) = src.y(0, rows[r], c);
    }
    out.tasks[k].data = std::move(d);
  }
  return out;
}

MetaDataset perturb(const MetaDataset& md, const PerturbSpec& spec, std::uint64_t seed) {
  MetaDataset out = md;
  if (spec.mode == PerturbMode::Amplify) {
    for (auto& t : out.tasks) {
      for (double& v : t.data.y.data()) v *= spec.amplify;
    }
    return out;
  }
  if (!(spec.noise_pct >= 0)) throw ConfigError("noise_pct must be non-negative");
  Rng rng(seed);
  const double frac = spec.noise_pct / 100.0;
  for (auto& t : out.tasks) {
    for (double& v : t.data.y.data()) v += v * frac * rng.uniform(-1.0, 1.0);
  }
  return out;
}

}  // namespace nff
