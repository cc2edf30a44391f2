#include "dpsco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace dpsco {

std::string_view to_string(MetricKind kind) {
  switch (kind) {
    case MetricKind::kConst: return "const";
    case MetricKind::kSqrt: return "sqrt";
    case MetricKind::kLinear: return "linear";
    case MetricKind::kCustom: return "custom";
  }
  return "unknown";
}

MetricKind parse_metric_kind(std::string_view name) {
  if (name == "const") return MetricKind::kConst;
  if (name == "sqrt") return MetricKind::kSqrt;
  if (name == "linear") return MetricKind::kLinear;
  if (name == "custom") return MetricKind::kCustom;
  throw std::invalid_argument("unknown metric '" + std::string(name) + "' (expected const, sqrt, linear)");
}

DiagonalMetric::DiagonalMetric(MetricKind kind, std::vector<double> diag, std::vector<std::size_t> perm)
    : kind_(kind), diag_(std::move(diag)), perm_(std::move(perm)) {}

DiagonalMetric DiagonalMetric::make(MetricKind kind, std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("metric dimension must be positive");
  if (kind == MetricKind::kCustom) throw std::invalid_argument("custom metrics need explicit entries");
  std::vector<double> diag(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    const double index = static_cast<double>(j + 1);
    switch (kind) {
      case MetricKind::kConst: diag[j] = 1.0; break;
      case MetricKind::kSqrt: diag[j] = 1.0 / std::sqrt(index); break;
      case MetricKind::kLinear: diag[j] = 1.0 / index; break;
      case MetricKind::kCustom: break;
    }
  }
  std::vector<std::size_t> perm(dim);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  return DiagonalMetric(kind, std::move(diag), std::move(perm));
}

DiagonalMetric DiagonalMetric::custom(std::vector<double> entries) {
  if (entries.empty()) throw std::invalid_argument("metric dimension must be positive");
  for (std::size_t j = 0; j < entries.size(); ++j) {
    if (!std::isfinite(entries[j]) || entries[j] <= 0.0) {
      throw std::invalid_argument("metric entry " + std::to_string(j) + " must be positive and finite");
    }
  }
  std::vector<std::size_t> perm(entries.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  // Stable so equal entries keep their user order (ties go to the lowest index).
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return entries[a] > entries[b]; });
  std::vector<double> diag(entries.size());
  for (std::size_t i = 0; i < perm.size(); ++i) diag[i] = entries[perm[i]];
  return DiagonalMetric(MetricKind::kCustom, std::move(diag), std::move(perm));
}

DiagonalMetric DiagonalMetric::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metric file " + path.string());
  std::vector<double> entries;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos) continue;
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(line.substr(start), &used);
    } catch (const std::exception&) {
      if (first) {
        first = false;
        continue;
      }
      throw std::runtime_error("bad metric entry '" + line + "' in " + path.string());
    }
    first = false;
    entries.push_back(value);
  }
  return custom(std::move(entries));
}

std::vector<double> DiagonalMetric::to_internal(std::span<const double> user) const {
  if (user.size() != dim()) throw std::invalid_argument("dimension mismatch in to_internal");
  std::vector<double> out(dim());
  for (std::size_t i = 0; i < dim(); ++i) out[i] = user[perm_[i]];
  return out;
}

std::vector<double> DiagonalMetric::to_user(std::span<const double> internal) const {
  if (internal.size() != dim()) throw std::invalid_argument("dimension mismatch in to_user");
  std::vector<double> out(dim());
  for (std::size_t i = 0; i < dim(); ++i) out[perm_[i]] = internal[i];
  return out;
}

double mahalanobis_norm(std::span<const double> v, const DiagonalMetric& metric) {
  if (v.size() != metric.dim()) {
    throw std::invalid_argument("mahalanobis_norm: vector has " + std::to_string(v.size()) + " entries, metric has " +
                                std::to_string(metric.dim()));
  }
  const auto a = metric.diag();
  double sum = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) sum += a[j] * v[j] * v[j];
  return std::sqrt(sum);
}

std::vector<double> restricted_coeffs(const DiagonalMetric& metric) {
  const auto a = metric.diag();
  std::vector<double> coeffs(a.size() + 1, 0.0);
  for (std::size_t k = 0; k < a.size(); ++k) coeffs[k] = std::sqrt(a[k]);
  return coeffs;
}

SubspaceProjector top_k_projector(const DiagonalMetric& metric, std::size_t k) {
  if (k > metric.dim()) {
    throw std::out_of_range("top_k_projector: k = " + std::to_string(k) + " exceeds dimension " +
                            std::to_string(metric.dim()));
  }
  std::vector<std::size_t> axes(k);
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  return SubspaceProjector::coordinates(metric.dim(), std::move(axes));
}

}  // namespace dpsco
