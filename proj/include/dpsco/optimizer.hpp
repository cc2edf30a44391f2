#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpsco/losses.hpp"
#include "dpsco/metrics.hpp"
#include "dpsco/projector.hpp"
#include "dpsco/random.hpp"
#include "dpsco/trace.hpp"

namespace dpsco {

/// Hyperparameters of one DP-SGD run.
struct SgdConfig {
  std::size_t steps = 1;       ///< T, number of updates
  double eta = 0.01;           ///< learning rate
  double alpha = 0.0;          ///< ridge strength towards x0
  double sigma = 0.0;          ///< noise multiplier
  double g0 = 1.0;             ///< Lipschitz constant scaling the noise
  std::size_t batch_size = 1;  ///< examples averaged per step; n means every record once
  std::optional<double> clip;  ///< per-example l2 clip threshold
  std::uint64_t seed = 0;
  std::optional<std::size_t> trace_every;

  /// Throws std::invalid_argument naming the first violated constraint.
  void validate(std::size_t num_examples) const;
};

struct RunResult {
  std::vector<double> xbar;  ///< mean of x^(1..T), x^(0) excluded
  std::vector<std::size_t> loss_steps;
  std::vector<double> loss_trajectory;  ///< regularized objective at loss_steps
  double final_empirical_loss = 0.0;    ///< unregularized objective at xbar
  std::optional<double> population_loss;
  std::optional<GradientTrace> trace;
};

/// Per-step view handed to an optional observer; spans are valid only during the call.
struct StepView {
  std::size_t step;                   ///< 1-based
  std::span<const double> x_prev;     ///< iterate the gradient was taken at
  std::span<const double> gradient;   ///< averaged clipped gradient, before projection
  std::span<const double> projected;  ///< after projection (== gradient without projector)
  std::span<const double> noise;      ///< G * zeta
  std::span<const double> x_next;
};
using StepObserver = std::function<void(const StepView&)>;

/// A finite sum (1/n) sum_i f_i(x) exposing per-example subgradients.
template <class O>
concept FiniteSumObjective = requires(const O& o, std::span<const double> x, std::size_t i, std::span<double> out) {
  { o.size() } -> std::convertible_to<std::size_t>;
  { o.dim() } -> std::convertible_to<std::size_t>;
  { o.loss(x) } -> std::convertible_to<double>;
  o.subgradient(x, i, out);
};

/// Average Mahalanobis distance to the records of a dataset.
class MedianObjective {
 public:
  MedianObjective(const MedianDataset& data, const DiagonalMetric& metric) : data_(data), metric_(metric) {
    if (data.dim() != metric.dim()) {
      throw std::invalid_argument("dataset has dimension " + std::to_string(data.dim()) + ", metric has " +
                                  std::to_string(metric.dim()));
    }
  }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t dim() const noexcept { return data_.dim(); }
  double loss(std::span<const double> x) const { return regularized_empirical_loss(x, data_, metric_, 0.0, {}); }
  void subgradient(std::span<const double> x, std::size_t i, std::span<double> out) const {
    per_example_subgradient(x, data_.row(i), metric_, out);
  }

 private:
  const MedianDataset& data_;
  const DiagonalMetric& metric_;
};

/// Rescales `g` in place to l2 norm at most `threshold`.
inline void clip_to_norm(std::span<double> g, double threshold) {
  double sq = 0.0;
  for (double v : g) sq += v * v;
  const double norm = std::sqrt(sq);
  if (norm > threshold) {
    const double scale = threshold / norm;
    for (double& v : g) v *= scale;
  }
}

/// Loss trajectory stride: max(1, T / 1000).
inline std::size_t trajectory_stride(std::size_t steps) { return std::max<std::size_t>(1, steps / 1000); }

/// DP-SGD on F_alpha(x) = F(x) + (alpha/2)||x - x0||^2.
///
/// Each step samples `batch_size` indices uniformly with replacement (or takes
/// every record once when `batch_size` equals n), averages
/// (optionally clipped) per-example subgradients, optionally projects that
/// average, then adds alpha (x - x0) and full-dimensional noise G * zeta with
/// zeta ~ N(0, sigma^2 I). Batch indices are addressed by (step, slot) and
/// noise by (coordinate, step), so a run is a pure function of its inputs and
/// coordinate j sees the same noise whatever the ambient dimension.
template <FiniteSumObjective Objective>
RunResult dpsgd_run(const SgdConfig& config, const Objective& objective, std::span<const double> x0,
                    const SubspaceProjector* projector = nullptr, const StepObserver& observer = {}) {
  const std::size_t n = objective.size();
  const std::size_t d = objective.dim();
  if (n == 0) throw std::invalid_argument("dpsgd_run: empty dataset");
  config.validate(n);
  if (x0.size() != d) {
    throw std::invalid_argument("dpsgd_run: x0 has " + std::to_string(x0.size()) + " entries, expected " +
                                std::to_string(d));
  }
  if (projector != nullptr && projector->dim() != d) {
    throw std::invalid_argument("dpsgd_run: projector dimension " + std::to_string(projector->dim()) +
                                " does not match " + std::to_string(d));
  }

  const CounterRng rng(config.seed);
  const double noise_scale = config.g0 * config.sigma;
  const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
  const bool full_batch = config.batch_size == n;
  const std::size_t stride = trajectory_stride(config.steps);

  std::vector<double> x(x0.begin(), x0.end());
  std::vector<double> x_prev(d);
  std::vector<double> xsum(d, 0.0);
  std::vector<double> g(d);
  std::vector<double> avg(d);
  std::vector<double> projected(projector ? d : 0);
  std::vector<double> noise(d, 0.0);
  std::vector<double> spare_normal(d, 0.0);

  RunResult result;
  std::vector<double> trace_rows;
  std::vector<std::size_t> trace_steps;
  const std::size_t trace_every = config.trace_every.value_or(0);
  if (trace_every != 0) {
    trace_rows.reserve((config.steps / trace_every) * d);
    trace_steps.reserve(config.steps / trace_every);
  }

  for (std::size_t t = 1; t <= config.steps; ++t) {
    std::fill(avg.begin(), avg.end(), 0.0);
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      const auto i = full_batch ? b
                                : static_cast<std::size_t>(rng.index(Stream::kBatchIndex, t, static_cast<std::uint32_t>(b), n));
      objective.subgradient(x, i, g);
      if (config.clip) clip_to_norm(g, *config.clip);
      for (std::size_t j = 0; j < d; ++j) avg[j] += g[j];
    }
    if (config.batch_size != 1) {
      for (double& v : avg) v *= inv_batch;
    }
    if (trace_every != 0 && t % trace_every == 0) {
      trace_rows.insert(trace_rows.end(), avg.begin(), avg.end());
      trace_steps.push_back(t);
    }
    const std::vector<double>* signal = &avg;
    if (projector != nullptr) {
      projector->apply(avg, projected);
      signal = &projected;
    }
    if (noise_scale != 0.0) {
      // Box-Muller pairs cover steps (2m+1, 2m+2) of one coordinate.
      const std::uint32_t pair = static_cast<std::uint32_t>((t - 1) / 2);
      const bool first = (t - 1) % 2 == 0;
      for (std::size_t j = 0; j < d; ++j) {
        double z;
        if (first) {
          const auto zz = rng.normal_pair(Stream::kNoise, j, pair);
          z = zz[0];
          spare_normal[j] = zz[1];
        } else {
          z = spare_normal[j];
        }
        noise[j] = noise_scale * z;
      }
    }
    x_prev = x;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] -= config.eta * ((*signal)[j] + config.alpha * (x[j] - x0[j]) + noise[j]);
      xsum[j] += x[j];
    }
    if (observer) observer(StepView{t, x_prev, avg, *signal, noise, x});
    if (t % stride == 0) {
      double reg = 0.0;
      if (config.alpha != 0.0) {
        for (std::size_t j = 0; j < d; ++j) reg += (x[j] - x0[j]) * (x[j] - x0[j]);
      }
      result.loss_steps.push_back(t);
      result.loss_trajectory.push_back(objective.loss(x) + 0.5 * config.alpha * reg);
    }
  }

  const double inv_steps = 1.0 / static_cast<double>(config.steps);
  result.xbar.resize(d);
  for (std::size_t j = 0; j < d; ++j) result.xbar[j] = xsum[j] * inv_steps;
  result.final_empirical_loss = objective.loss(result.xbar);
  if (trace_every != 0) {
    GradientTrace trace;
    trace.H = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        trace_rows.data(), static_cast<Eigen::Index>(trace_steps.size()), static_cast<Eigen::Index>(d));
    trace.step_indices = std::move(trace_steps);
    result.trace = std::move(trace);
  }
  return result;
}

inline RunResult dpsgd_run(const SgdConfig& config, const MedianDataset& data, const DiagonalMetric& metric,
                           std::span<const double> x0, const SubspaceProjector* projector = nullptr,
                           const StepObserver& observer = {}) {
  return dpsgd_run(config, MedianObjective(data, metric), x0, projector, observer);
}

/// The trace recorded during a run; throws if the run had tracing disabled.
inline const GradientTrace& collect_gradient_trace(const RunResult& result) {
  if (!result.trace) throw std::logic_error("collect_gradient_trace: run was configured without trace_every");
  return *result.trace;
}

inline void SgdConfig::validate(std::size_t num_examples) const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("SgdConfig: " + what); };
  if (steps < 1) fail("T must be >= 1");
  if (steps > std::numeric_limits<std::uint32_t>::max()) fail("T must fit in 32 bits");
  if (!(eta > 0.0) || !std::isfinite(eta)) fail("eta must be positive");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("alpha must be nonnegative");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) fail("sigma must be nonnegative");
  if (!(g0 > 0.0) || !std::isfinite(g0)) fail("g0 must be positive");
  if (batch_size < 1 || batch_size > num_examples) {
    fail("batch_size must lie in [1, " + std::to_string(num_examples) + "], got " + std::to_string(batch_size));
  }
  if (clip && !(*clip > 0.0)) fail("clip must be positive");
  if (trace_every && *trace_every < 1) fail("trace_every must be >= 1");
}

}  // namespace dpsco
