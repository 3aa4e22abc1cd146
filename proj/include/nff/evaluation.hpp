#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nff/metadata.hpp"
#include "nff/models.hpp"

namespace nff {

/// Sum of squared errors over every point of the task.
double task_score(const Model& model, const MetaTask& task);

struct ScoreReport {
  std::string model_name;
  std::string dataset;
  std::uint64_t seed = 0;
  std::vector<double> per_task;
  /// (sum of per_task) / per_task.size().
  double mean = 0.0;
};

ScoreReport score_report(const Model& model, const MetaDataset& eval, const std::string& model_name,
                         const std::string& dataset, std::uint64_t seed);

/// "[structure]_(pL,qN)_[activation]_[info]", e.g. "WGN_(4L,64N)_ISLU1b_MB".
/// An empty `info` drops the trailing field.
std::string model_run_name(const std::string& structure, const MlpConfig& main, const std::string& info);

/// Mean squared error over all points of all tasks.
double mean_squared_error(const Model& model, const MetaDataset& md);

// ---------------------------------------------------------------------------
// Derivative curves.

/// Order-0/1/2 samples of f on `grid`. Order 1 is the central difference
/// (f(x+h) - f(x-h)) / 2h; order 2 nests two central differences of step h/2,
/// (f(x+h) - 2 f(x) + f(x-h)) / h^2.
std::vector<double> finite_difference(const std::function<double(double)>& f, std::span<const double> grid,
                                      int order, double h);

struct DerivativeCurve {
  std::size_t axis = 0;
  int order = 0;
  std::vector<double> grid;
  std::vector<double> values;
};

/// Model output (column 0 of y) along `axis` through `base`, other inputs
/// fixed. Throws ConfigError for an invalid order, non-positive fd_h, or an
/// fd_h larger than the grid spacing.
DerivativeCurve derivative_curve(const Model& model, std::span<const double> z, std::span<const double> base,
                                 std::size_t axis, int order, std::span<const double> grid, double fd_h);

// ---------------------------------------------------------------------------
// Smoothness.

struct SmoothnessConfig {
  double period = 0.007;
  double step = 0.007;
  int derivative_order = 0;
  /// Finite-difference step; <= 0 means period / 2.
  double fd_h = 0.0;
  /// Points per off-axis dimension of the normalized input cube.
  std::size_t off_axis_points = 21;

  double effective_fd_h() const { return fd_h > 0 ? fd_h : period / 2.0; }
  void validate() const;
};

/// Contribution |A| + |B| - (A + B) of one 5-sample window at uniform spacing.
double smoothness_window(double ym2, double ym1, double y0, double y1, double y2);

/// Sum over windows starting at samples 0, stride, 2*stride, ... that fit.
/// Throws DataError with fewer than 5 samples.
double smoothness_1d(std::span<const double> samples, std::size_t stride = 1);

/// Windows of spacing `period` starting at lo, lo + step, ... while the
/// window ends inside [lo, hi]; f is sampled directly at each window point.
double smoothness_windows(const std::function<double(double)>& f, double lo, double hi, double period,
                          double step);

/// Sum over every axis of the normalized input cube and every line parallel
/// to it (off-axis coordinates on a uniform grid) of the windowed score of
/// the order-k derivative along the line. Summed over all `zs` (pass one
/// empty z for models without metaparameters).
double smoothness_score(const Model& model, const std::vector<std::vector<double>>& zs,
                        const SmoothnessConfig& cfg);

// ---------------------------------------------------------------------------
// CSV outputs.

/// model_name,dataset,seed,score; rows sorted ascending by score.
void write_scores_csv(const std::filesystem::path& path, std::vector<ScoreReport> reports);
/// model_name,dataset,seed,task,sse.
void write_task_scores_csv(const std::filesystem::path& path, const std::vector<ScoreReport>& reports);

struct SmoothnessRow {
  std::string model_name;
  int order = 0;
  double period = 0.0;
  double step = 0.0;
  double score = 0.0;
};
/// model_name,order,period,step,score.
void write_smoothness_csv(const std::filesystem::path& path, const std::vector<SmoothnessRow>& rows);

struct NamedCurve {
  std::string model_name;
  DerivativeCurve curve;
};
/// model_name,axis,order,x,value.
void write_curves_csv(const std::filesystem::path& path, const std::vector<NamedCurve>& curves);

/// layer,node,x,value for a one-input network's per-layer outputs.
void write_basis_csv(const std::filesystem::path& path, std::span<const double> x_grid,
                     const std::vector<Tensor3>& layers);

}  // namespace nff
