#include "nff/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "nff/csv.hpp"
#include "nff/error.hpp"
#include "nff/parallel.hpp"

namespace nff {

namespace {

Tensor3 meta_tensor(std::span<const double> z) {
  return Tensor3({1, 1, z.size()}, std::vector<double>(z.begin(), z.end()));
}

// Output column 0 at each of the n rows of `x` (n x d, row-major).
std::vector<double> eval_rows(const Model& model, std::span<const double> z, std::vector<double> x, std::size_t d) {
  const std::size_t n = x.size() / d;
  const Tensor3 y = predict(model, meta_tensor(z), Tensor3({1, n, d}, std::move(x)));
  const std::size_t dy = y.shape().d2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = y[i * dy];
  return out;
}

void check_order(int order) {
  if (order < 0 || order > 2) throw ConfigError("derivative order must be 0, 1 or 2, got " + std::to_string(order));
}

// Stencil offsets (in units of h) and weights (before division by h^order).
struct Stencil {
  std::vector<double> offsets;
  std::vector<double> weights;
  double scale;
};

Stencil stencil(int order, double h) {
  switch (order) {
    case 0: return {{0.0}, {1.0}, 1.0};
    case 1: return {{-1.0, 1.0}, {-1.0, 1.0}, 1.0 / (2.0 * h)};
    default: return {{-1.0, 0.0, 1.0}, {1.0, -2.0, 1.0}, 1.0 / (h * h)};
  }
}

// Order-k derivative along `axis` at `positions`, other coordinates from `base`.
std::vector<double> line_derivative(const Model& model, std::span<const double> z, std::span<const double> base,
                                    std::size_t axis, std::span<const double> positions, int order, double h) {
  const std::size_t d = base.size();
  const Stencil st = stencil(order, h);
  const std::size_t s = st.offsets.size();
  std::vector<double> x;
  x.reserve(positions.size() * s * d);
  for (double p : positions) {
    for (double off : st.offsets) {
      const std::size_t row = x.size();
      x.insert(x.end(), base.begin(), base.end());
      x[row + axis] = p + off * h;
    }
  }
  const std::vector<double> f = eval_rows(model, z, std::move(x), d);
  std::vector<double> out(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    double acc = 0.0;
    for (std::size_t q = 0; q < s; ++q) acc += st.weights[q] * f[i * s + q];
    out[i] = acc * st.scale;
  }
  return out;
}

// Positions sampled along one line and the start index of each window.
struct LinePlan {
  std::vector<double> positions;
  std::vector<std::size_t> window_starts;
  std::size_t window_spacing = 1;
};

LinePlan plan_line(double period, double step) {
  constexpr double kEps = 1e-9;
  LinePlan plan;
  const auto n = static_cast<std::size_t>(std::floor((1.0 + kEps) / period)) + 1;
  if (n < 5) throw ConfigError("smoothness period too large for the unit interval");
  const double ratio = step / period;
  const double k = std::round(ratio);
  if (k >= 1 && std::abs(ratio - k) < kEps) {
    // Windows land on one shared lattice of spacing `period`.
    for (std::size_t i = 0; i < n; ++i) plan.positions.push_back(static_cast<double>(i) * period);
    const auto stride = static_cast<std::size_t>(k);
    for (std::size_t i = 0; i + 4 < n; i += stride) plan.window_starts.push_back(i);
    plan.window_spacing = 1;
    return plan;
  }
  for (std::size_t j = 0;; ++j) {
    const double start = static_cast<double>(j) * step;
    if (start + 4.0 * period > 1.0 + kEps) break;
    plan.window_starts.push_back(plan.positions.size());
    for (int q = 0; q < 5; ++q) plan.positions.push_back(start + q * period);
  }
  return plan;
}

double plan_score(const LinePlan& plan, const std::vector<double>& v) {
  double s = 0.0;
  const std::size_t sp = plan.window_spacing;
  for (std::size_t w : plan.window_starts) {
    s += smoothness_window(v[w], v[w + sp], v[w + 2 * sp], v[w + 3 * sp], v[w + 4 * sp]);
  }
  return s;
}

}  // namespace

double task_score(const Model& model, const MetaTask& task) {
  const TaskDataset& d = task.data;
  if (model.input_dim() != d.input_dim() || model.output_dim() != d.output_dim()) {
    throw ConfigError("task_score: model and task dimensions differ");
  }
  const Tensor3 pred = predict(model, meta_tensor(task.z), d.x);
  double sse = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - d.y[i];
    sse += e * e;
  }
  return sse;
}

ScoreReport score_report(const Model& model, const MetaDataset& eval, const std::string& model_name,
                         const std::string& dataset, std::uint64_t seed) {
  ScoreReport r{model_name, dataset, seed, std::vector<double>(eval.tasks.size()), 0.0};
  parallel_for(eval.tasks.size(), [&](std::size_t k) { r.per_task[k] = task_score(model, eval.tasks[k]); });
  double total = 0.0;
  for (double v : r.per_task) total += v;
  r.mean = r.per_task.empty() ? 0.0 : total / static_cast<double>(r.per_task.size());
  return r;
}

std::string model_run_name(const std::string& structure, const MlpConfig& main, const std::string& info) {
  std::string name = structure + "_" + main.tag() + "_" + std::string(activation_name(main.activation.kind));
  if (!info.empty()) name += "_" + info;
  return name;
}

double mean_squared_error(const Model& model, const MetaDataset& md) {
  double sse = 0.0;
  std::size_t n = 0;
  for (const auto& t : md.tasks) {
    sse += task_score(model, t);
    n += t.data.y.size();
  }
  return n == 0 ? 0.0 : sse / static_cast<double>(n);
}

std::vector<double> finite_difference(const std::function<double(double)>& f, std::span<const double> grid,
                                      int order, double h) {
  check_order(order);
  if (order > 0 && !(h > 0)) throw ConfigError("fd_h must be positive");
  const Stencil st = stencil(order, h);
  std::vector<double> out;
  out.reserve(grid.size());
  for (double x : grid) {
    double acc = 0.0;
    for (std::size_t q = 0; q < st.offsets.size(); ++q) acc += st.weights[q] * f(x + st.offsets[q] * h);
    out.push_back(acc * st.scale);
  }
  return out;
}

DerivativeCurve derivative_curve(const Model& model, std::span<const double> z, std::span<const double> base,
                                 std::size_t axis, int order, std::span<const double> grid, double fd_h) {
  check_order(order);
  if (base.size() != model.input_dim()) throw ConfigError("derivative_curve: base point has the wrong width");
  if (axis >= base.size()) throw ConfigError("derivative_curve: axis out of range");
  if (order > 0) {
    if (!(fd_h > 0)) throw ConfigError("fd_h must be positive");
    for (std::size_t i = 1; i < grid.size(); ++i) {
      if (std::abs(grid[i] - grid[i - 1]) < fd_h) {
        throw ConfigError("grid spacing " + format_double(std::abs(grid[i] - grid[i - 1])) +
                          " is finer than fd_h " + format_double(fd_h));
      }
    }
  }
  DerivativeCurve c{axis, order, std::vector<double>(grid.begin(), grid.end()), {}};
  c.values = line_derivative(model, z, base, axis, grid, order, fd_h);
  return c;
}

void SmoothnessConfig::validate() const {
  if (!(period > 0)) throw ConfigError("smoothness period must be positive");
  if (!(step > 0)) throw ConfigError("smoothness step must be positive");
  if (4.0 * period > 1.0) throw ConfigError("smoothness window 4*period must fit in [0,1]");
  check_order(derivative_order);
  if (off_axis_points == 0) throw ConfigError("off_axis_points must be positive");
}

double smoothness_window(double ym2, double ym1, double /*y0*/, double y1, double y2) {
  // Chord through (x-2, y-2) and (x2, y2) at x-1 and x1.
  const double a = ym1 - (3.0 * ym2 + y2) / 4.0;
  const double b = y1 - (ym2 + 3.0 * y2) / 4.0;
  return std::abs(a) + std::abs(b) - (a + b);
}

double smoothness_1d(std::span<const double> y, std::size_t stride) {
  if (y.size() < 5) throw DataError("smoothness needs at least 5 samples, got " + std::to_string(y.size()));
  if (stride == 0) throw ConfigError("smoothness stride must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i + 4 < y.size(); i += stride) s += smoothness_window(y[i], y[i + 1], y[i + 2], y[i + 3], y[i + 4]);
  return s;
}

double smoothness_windows(const std::function<double(double)>& f, double lo, double hi, double period,
                          double step) {
  if (!(period > 0) || !(step > 0)) throw ConfigError("smoothness period and step must be positive");
  if (lo + 4.0 * period > hi + 1e-9 * std::max(1.0, std::abs(hi))) {
    throw DataError("smoothness needs at least 5 samples");
  }
  double s = 0.0;
  for (std::size_t j = 0;; ++j) {
    const double x = lo + static_cast<double>(j) * step;
    if (x + 4.0 * period > hi + 1e-9 * std::max(1.0, std::abs(hi))) break;
    s += smoothness_window(f(x), f(x + period), f(x + 2 * period), f(x + 3 * period), f(x + 4 * period));
  }
  return s;
}

double smoothness_score(const Model& model, const std::vector<std::vector<double>>& zs, const SmoothnessConfig& cfg) {
  cfg.validate();
  const std::size_t d = model.input_dim();
  const LinePlan plan = plan_line(cfg.period, cfg.step);
  const double h = cfg.effective_fd_h();
  const std::size_t q = cfg.off_axis_points;
  std::size_t lines_per_axis = 1;
  for (std::size_t i = 1; i < d; ++i) lines_per_axis *= q;
  const double off_step = q > 1 ? 1.0 / static_cast<double>(q - 1) : 0.0;

  std::vector<double> per_line(zs.size() * d * lines_per_axis);
  parallel_for(per_line.size(), [&](std::size_t idx) {
    const std::size_t line = idx % lines_per_axis;
    const std::size_t axis = (idx / lines_per_axis) % d;
    const auto& z = zs[idx / (lines_per_axis * d)];
    std::vector<double> base(d, 0.0);
    std::size_t rem = line;
    for (std::size_t c = 0; c < d; ++c) {
      if (c == axis) continue;
      base[c] = q > 1 ? static_cast<double>(rem % q) * off_step : 0.5;
      rem /= q;
    }
    const auto v = line_derivative(model, z, base, axis, plan.positions, cfg.derivative_order, h);
    per_line[idx] = plan_score(plan, v);
  });
  return pairwise_sum(per_line.data(), per_line.size());
}

void write_scores_csv(const std::filesystem::path& path, std::vector<ScoreReport> reports) {
  std::stable_sort(reports.begin(), reports.end(),
                   [](const ScoreReport& a, const ScoreReport& b) { return a.mean < b.mean; });
  CsvWriter w(path, {"model_name", "dataset", "seed", "score"});
  for (const auto& r : reports) w.row({r.model_name, r.dataset, std::to_string(r.seed), format_double(r.mean)});
  w.close();
}

void write_task_scores_csv(const std::filesystem::path& path, const std::vector<ScoreReport>& reports) {
  CsvWriter w(path, {"model_name", "dataset", "seed", "task", "sse"});
  for (const auto& r : reports) {
    for (std::size_t k = 0; k < r.per_task.size(); ++k) {
      w.row({r.model_name, r.dataset, std::to_string(r.seed), std::to_string(k), format_double(r.per_task[k])});
    }
  }
  w.close();
}

void write_smoothness_csv(const std::filesystem::path& path, const std::vector<SmoothnessRow>& rows) {
  CsvWriter w(path, {"model_name", "order", "period", "step", "score"});
  for (const auto& r : rows) {
    w.row({r.model_name, std::to_string(r.order), format_double(r.period), format_double(r.step),
           format_double(r.score)});
  }
  w.close();
}

void write_curves_csv(const std::filesystem::path& path, const std::vector<NamedCurve>& curves) {
  CsvWriter w(path, {"model_name", "axis", "order", "x", "value"});
  for (const auto& nc : curves) {
    const auto& c = nc.curve;
    for (std::size_t i = 0; i < c.grid.size(); ++i) {
      w.row({nc.model_name, std::to_string(c.axis), std::to_string(c.order), format_double(c.grid[i]),
             format_double(c.values[i])});
    }
  }
  w.close();
}

void write_basis_csv(const std::filesystem::path& path, std::span<const double> x_grid,
                     const std::vector<Tensor3>& layers) {
  CsvWriter w(path, {"layer", "node", "x", "value"});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Tensor3& t = layers[l];
    const std::size_t width = t.shape().d2;
    if (t.shape().d1 != x_grid.size()) throw ContractError("basis layer rows do not match the x grid");
    for (std::size_t n = 0; n < width; ++n) {
      for (std::size_t i = 0; i < x_grid.size(); ++i) {
        w.row({std::to_string(l), std::to_string(n), format_double(x_grid[i]), format_double(t(0, i, n))});
      }
    }
  }
  w.close();
}

}  // namespace nff
