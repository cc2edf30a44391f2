#include "dpsco/losses.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>

#include "dpsco/random.hpp"

namespace dpsco {
namespace {

void check_dims(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(fmt::format("{}: dimension mismatch ({} vs {})", what, a, b));
}

// Sequential accumulation: appending exact zeros never changes the result,
// which keeps losses bitwise identical across ambient dimensions.
double distance(std::span<const double> x, std::span<const double> xi, std::span<const double> a) {
  double sum = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double diff = x[j] - xi[j];
    sum += a[j] * diff * diff;
  }
  return std::sqrt(sum);
}

}  // namespace

MedianDataset::MedianDataset(std::size_t rows, std::size_t dim, std::vector<double> values, Split split)
    : rows_(rows), dim_(dim), split_(split), values_(std::move(values)) {
  if (rows_ == 0 || dim_ == 0) throw std::invalid_argument("dataset must have n >= 1 and d >= 1");
  if (values_.size() != rows_ * dim_) {
    throw std::invalid_argument(fmt::format("dataset expects {}x{} values, got {}", rows_, dim_, values_.size()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw std::invalid_argument(fmt::format("non-finite dataset entry at row {}, column {}", i / dim_, i % dim_));
    }
  }
}

void MedianDataset::save_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < rows_; ++i) {
    const auto r = row(i);
    for (std::size_t j = 0; j < dim_; ++j) out << (j ? "," : "") << fmt::format("{:.17g}", r[j]);
    out << '\n';
  }
}

MedianDataset MedianDataset::load_csv(const std::filesystem::path& path, Split split) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++cols;
    }
    if (rows == 0) dim = cols;
    if (cols != dim) throw std::runtime_error(fmt::format("{}: row {} has {} columns, expected {}", path.string(), rows, cols, dim));
    ++rows;
  }
  return MedianDataset(rows, dim, std::move(values), split);
}

double per_example_loss(std::span<const double> x, std::span<const double> xi, const DiagonalMetric& metric) {
  check_dims(x.size(), metric.dim(), "per_example_loss");
  check_dims(xi.size(), metric.dim(), "per_example_loss");
  return distance(x, xi, metric.diag());
}

void per_example_subgradient(std::span<const double> x, std::span<const double> xi, const DiagonalMetric& metric,
                             std::span<double> out) {
  check_dims(x.size(), metric.dim(), "per_example_subgradient");
  check_dims(xi.size(), metric.dim(), "per_example_subgradient");
  check_dims(out.size(), metric.dim(), "per_example_subgradient");
  const auto a = metric.diag();
  const double dist = distance(x, xi, a);
  if (dist == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = a[j] * (x[j] - xi[j]) / dist;
}

std::vector<double> per_example_subgradient(std::span<const double> x, std::span<const double> xi,
                                            const DiagonalMetric& metric) {
  std::vector<double> out(metric.dim());
  per_example_subgradient(x, xi, metric, out);
  return out;
}

double regularized_empirical_loss(std::span<const double> x, const MedianDataset& data, const DiagonalMetric& metric,
                                  double alpha, std::span<const double> x0) {
  check_dims(x.size(), metric.dim(), "regularized_empirical_loss");
  check_dims(data.dim(), metric.dim(), "regularized_empirical_loss");
  if (alpha < 0.0) throw std::invalid_argument("regularized_empirical_loss: alpha must be nonnegative");
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += distance(x, data.row(i), metric.diag());
  double loss = total / static_cast<double>(data.size());
  if (alpha != 0.0) {
    check_dims(x0.size(), x.size(), "regularized_empirical_loss");
    double ridge = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) ridge += (x[j] - x0[j]) * (x[j] - x0[j]);
    loss += 0.5 * alpha * ridge;
  }
  return loss;
}

std::vector<double> empirical_gradient(std::span<const double> x, const MedianDataset& data,
                                       const DiagonalMetric& metric, double alpha, std::span<const double> x0) {
  check_dims(x.size(), metric.dim(), "empirical_gradient");
  check_dims(data.dim(), metric.dim(), "empirical_gradient");
  check_dims(x0.size(), x.size(), "empirical_gradient");
  const std::size_t d = x.size();
  std::vector<double> grad(d, 0.0);
  std::vector<double> g(d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    per_example_subgradient(x, data.row(i), metric, g);
    for (std::size_t j = 0; j < d; ++j) grad[j] += g[j];
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (std::size_t j = 0; j < d; ++j) grad[j] = grad[j] * inv_n + alpha * (x[j] - x0[j]);
  return grad;
}

double estimate_population_loss(std::span<const double> xbar, const MedianDataset& test, const DiagonalMetric& metric) {
  check_dims(xbar.size(), metric.dim(), "estimate_population_loss");
  check_dims(test.dim(), metric.dim(), "estimate_population_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) total += distance(xbar, test.row(i), metric.diag());
  return total / static_cast<double>(test.size());
}

MedianDataset generate_low_rank_data(std::size_t n, std::size_t dim, std::size_t d_min, std::uint64_t seed,
                                       Split split) {
  if (n == 0) throw std::invalid_argument("generate_low_rank_data: n must be >= 1");
  if (d_min == 0 || dim < d_min) {
    throw std::invalid_argument(fmt::format("generate_low_rank_data: need d >= d_min >= 1 (d = {}, d_min = {})", dim, d_min));
  }
  const CounterRng rng(seed);
  std::vector<double> values(n * dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d_min; ++j) {
      values[i * dim + j] = 1.0 + rng.normal(Stream::kData, i, static_cast<std::uint32_t>(j));
    }
  }
  return MedianDataset(n, dim, std::move(values), split);
}

}  // namespace dpsco
