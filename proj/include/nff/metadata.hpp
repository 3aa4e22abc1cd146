#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nff/tensor.hpp"

namespace nff {

/// Inputs (1,N,d_x) and targets (1,N,d_y) of one task.
struct TaskDataset {
  Tensor3 x;
  Tensor3 y;

  std::size_t size() const { return x.shape().d1; }
  std::size_t input_dim() const { return x.shape().d2; }
  std::size_t output_dim() const { return y.shape().d2; }
  void validate() const;
};

struct Range {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const Range&) const = default;
};

struct MetaTask {
  std::vector<double> z;
  TaskDataset data;
  /// Position in the generating grid (or generation order), for provenance.
  std::size_t source_index = 0;
};

/// Tasks tagged with metaparameters. Ranges describe the variables'
/// nominal domains and drive `normalize`; an empty range list leaves that
/// group untouched.
struct MetaDataset {
  std::vector<MetaTask> tasks;
  std::vector<std::string> meta_names;
  std::vector<std::string> input_names;
  std::vector<std::string> target_names;
  std::vector<Range> meta_ranges;
  std::vector<Range> input_ranges;

  std::size_t meta_dim() const { return tasks.empty() ? meta_names.size() : tasks.front().z.size(); }
  std::size_t input_dim() const { return tasks.empty() ? input_names.size() : tasks.front().data.input_dim(); }
  std::size_t output_dim() const { return tasks.empty() ? target_names.size() : tasks.front().data.output_dim(); }
  std::size_t min_task_size() const;
  /// All z the same length, all tasks the same d_x and d_y, finite values.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Physics metadatasets on (B,k,m) x (L,t,phi) grids.

enum class GridDatasetKind { Spring = 1, Pressure = 2, Trig = 3 };

struct GridDatasetSpec {
  GridDatasetKind kind = GridDatasetKind::Spring;
  std::array<Range, 3> meta{};  // B, k, m
  std::array<Range, 3> task{};  // L, t, phi
  std::array<std::size_t, 3> meta_points{10, 10, 10};
  std::array<std::size_t, 3> task_points{21, 41, 41};
  double g = 9.8;
  std::size_t train_tasks = 100;
  std::size_t train_points = 640;
  std::size_t eval_tasks = 8;

  /// theta = sqrt(B) cos(sqrt((k g + (B-0.3)^2)/(k L + k m)) t + phi).
  static GridDatasetSpec dataset1();
  /// y = -m g/(B k) log(t/(t - B L)) + log(phi).
  static GridDatasetSpec dataset2();
  /// y = B sin(k t + B) + m cos^2(phi L + m).
  static GridDatasetSpec dataset3();

  std::size_t meta_grid_size() const { return meta_points[0] * meta_points[1] * meta_points[2]; }
  std::size_t task_grid_size() const { return task_points[0] * task_points[1] * task_points[2]; }
  double target(double B, double k, double m, double L, double t, double phi) const;
  std::string name() const;
  void validate() const;
};

/// Lazily evaluated full grid; every task is materialized on demand.
class MetaGrid {
 public:
  explicit MetaGrid(GridDatasetSpec spec);

  const GridDatasetSpec& spec() const { return spec_; }
  std::size_t size() const { return spec_.meta_grid_size(); }
  std::size_t points_per_task() const { return spec_.task_grid_size(); }

  /// Raw (B,k,m) of grid task `k`; B varies slowest.
  std::array<double, 3> meta(std::size_t k) const;
  /// Raw (L,t,phi) of grid point `i`; L varies slowest.
  std::array<double, 3> input(std::size_t i) const;
  double target(std::size_t k, std::size_t i) const;
  /// Raw, full-resolution task.
  TaskDataset task(std::size_t k) const;
  /// Raw task restricted to selected grid points.
  TaskDataset task(std::size_t k, std::span<const std::size_t> points) const;

 private:
  GridDatasetSpec spec_;
  std::array<std::vector<double>, 3> meta_axes_;
  std::array<std::vector<double>, 3> task_axes_;
};

struct AffineMap {
  double lo = 0.0;
  double hi = 1.0;
  double forward(double v) const { return (v - lo) / (hi - lo); }
  double inverse(double u) const { return lo + u * (hi - lo); }
};

/// Per-variable maps applied by `normalize`; empty groups were untouched.
struct NormalizationRecord {
  std::vector<AffineMap> inputs;
  std::vector<AffineMap> meta;
};

/// Min-max maps every input variable and metaparameter with a declared range
/// to [0,1]; targets are untouched. Throws DataError on a degenerate range.
std::pair<MetaDataset, NormalizationRecord> normalize(const MetaDataset& md);
MetaDataset denormalize(const MetaDataset& md, const NormalizationRecord& record);
std::vector<double> normalize_meta(std::span<const double> z, const NormalizationRecord& record);

struct GeneratedMetaData {
  GridDatasetSpec spec;
  std::uint64_t seed = 0;
  MetaGrid full;
  /// Normalized training tasks (train_tasks x train_points).
  MetaDataset train;
  /// Normalized held-out tasks at full resolution.
  MetaDataset eval;
  NormalizationRecord normalization;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> eval_indices;
  /// Sorted task-grid rows kept for each training task.
  std::vector<std::vector<std::size_t>> train_points;
};

/// Validates the whole grid's domain, samples the train/eval split and
/// normalizes it. Deterministic in (spec, seed).
GeneratedMetaData gen_dataset(const GridDatasetSpec& spec, std::uint64_t seed);
GeneratedMetaData gen_dataset1(const GridDatasetSpec& spec, std::uint64_t seed);
GeneratedMetaData gen_dataset2(const GridDatasetSpec& spec, std::uint64_t seed);
GeneratedMetaData gen_dataset3(const GridDatasetSpec& spec, std::uint64_t seed);

/// Material for the MetaDataset skeleton (names and ranges) of a grid spec.
MetaDataset grid_dataset_skeleton(const GridDatasetSpec& spec);

// ---------------------------------------------------------------------------
// Sine tasks y = A sin(p x + phi).

struct SineRanges {
  Range amplitude{-1.5, 1.5};
  Range frequency{0.5, 1.5};
  Range phase{0.0, 6.283185307179586};
  Range x{0.0, 10.0};
};

/// The six x-positions of the restricted sine regime.
std::vector<double> six_point_positions();

/// z = (A,p,phi). Without `x_positions` every task is sampled on a uniform
/// grid of `pts_per_task` points over [0,10]; with it, only at those x.
MetaDataset gen_sine_tasks(std::size_t n_tasks, std::size_t pts_per_task,
                           const std::optional<std::vector<double>>& x_positions, std::uint64_t seed,
                           const SineRanges& ranges = {});

// ---------------------------------------------------------------------------
// Meta-augmentation and metaparameter transforms.

enum class ShiftAxis { Y, X };

struct FictitiousSpec {
  std::size_t n_tasks = 10;
  double label_step = 0.02;
  double y_shift_per_step = 0.05;
  ShiftAxis shift_axis = ShiftAxis::Y;
  /// Input column moved in X mode.
  std::size_t x_column = 0;

  /// a_j = (j - n/2) * label_step, j = 0..n-1; includes 0.
  std::vector<double> labels() const;
};

/// One task per fictitious label a; task a has its targets (or
/// `x_column`) shifted by (a / label_step) * y_shift_per_step.
MetaDataset fictitious_augment(const TaskDataset& task, const FictitiousSpec& spec);

/// Targets at the probe inputs, using the nearest row of `task`. Throws
/// DataError if the nearest row is farther than `tolerance` (max-norm).
std::vector<double> probe_values(const TaskDataset& task, std::span<const std::vector<double>> probes,
                                 double tolerance);

/// Replaces every z with the targets at the shared probe inputs.
MetaDataset value_metaparams(const MetaDataset& md, std::span<const std::vector<double>> probes,
                             double tolerance = 1e-9);
/// Draws `probe_count` probe inputs (seeded) from the first task's rows.
MetaDataset value_metaparams(const MetaDataset& md, std::size_t probe_count, std::uint64_t seed,
                             double tolerance = 1e-9);
/// Grid indices of the probe points `value_metaparams` would draw for a grid.
std::vector<std::size_t> draw_probe_points(std::size_t grid_points, std::size_t probe_count,
                                           std::uint64_t seed);
/// sWGN relabeling of a generated split: z becomes the raw targets at
/// shared grid probe points (exact, from the full-resolution tasks).
void relabel_with_grid_probes(GeneratedMetaData& data, std::size_t probe_count, std::uint64_t seed);

/// One flat task whose rows are [x, z].
TaskDataset meta_input_join(const MetaDataset& md);

/// Keeps `n_points` rows per task drawn without replacement.
MetaDataset subsample_points(const MetaDataset& md, std::size_t n_points, std::uint64_t seed);

enum class PerturbMode { Amplify, Noise };

struct PerturbSpec {
  PerturbMode mode = PerturbMode::Amplify;
  double amplify = 20.0;
  double noise_pct = 1.0;
};

/// Target transform; noise is relative, uniform in +-noise_pct% of |y|.
MetaDataset perturb(const MetaDataset& md, const PerturbSpec& spec, std::uint64_t seed);

}  // namespace nff
