#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dpsco/metrics.hpp"

namespace dpsco {

enum class Split { kTrain, kTest };

/// n x d row-major matrix of records; row i is the feature vector x_i.
class MedianDataset {
 public:
  MedianDataset(std::size_t rows, std::size_t dim, std::vector<double> values, Split split = Split::kTrain);

  std::size_t size() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  Split split() const noexcept { return split_; }

  std::span<const double> row(std::size_t i) const noexcept { return {values_.data() + i * dim_, dim_}; }
  std::span<const double> values() const noexcept { return values_; }

  /// Writes one record per line, no header.
  void save_csv(const std::filesystem::path& path) const;
  static MedianDataset load_csv(const std::filesystem::path& path, Split split = Split::kTrain);

 private:
  std::size_t rows_;
  std::size_t dim_;
  Split split_;
  std::vector<double> values_;
};

/// f(x; xi) = ||x - xi||_A.
double per_example_loss(std::span<const double> x, std::span<const double> xi, const DiagonalMetric& metric);

/// A (x - xi) / ||x - xi||_A, or zero at x == xi. Writes into `out`.
void per_example_subgradient(std::span<const double> x, std::span<const double> xi, const DiagonalMetric& metric,
                             std::span<double> out);
std::vector<double> per_example_subgradient(std::span<const double> x, std::span<const double> xi,
                                            const DiagonalMetric& metric);

/// Mean per-example loss plus (alpha/2) ||x - x0||_2^2.
double regularized_empirical_loss(std::span<const double> x, const MedianDataset& data, const DiagonalMetric& metric,
                                  double alpha, std::span<const double> x0);

/// Gradient of regularized_empirical_loss, using the zero subgradient at kinks.
std::vector<double> empirical_gradient(std::span<const double> x, const MedianDataset& data,
                                       const DiagonalMetric& metric, double alpha, std::span<const double> x0);

/// Mean A-distance from xbar to the held-out records.
double estimate_population_loss(std::span<const double> xbar, const MedianDataset& test, const DiagonalMetric& metric);

/// Records whose first `d_min` coordinates are i.i.d. Normal(1, 1) and whose
/// remaining coordinates are exactly zero. Entry (i, j) depends only on
/// (seed, i, j), so the leading block is the same for every ambient `dim`.
MedianDataset generate_low_rank_data(std::size_t n, std::size_t dim, std::size_t d_min, std::uint64_t seed,
                                       Split split = Split::kTrain);

}  // namespace dpsco
