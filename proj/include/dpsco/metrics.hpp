#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpsco/projector.hpp"

namespace dpsco {

enum class MetricKind { kConst, kSqrt, kLinear, kCustom };

std::string_view to_string(MetricKind kind);
/// Parses "const", "sqrt", "linear" or "custom".
MetricKind parse_metric_kind(std::string_view name);

/// Diagonal positive-definite matrix A defining ||v||_A = sqrt(v^T A v).
///
/// Entries are held sorted in non-increasing order so that axis j is the
/// (j+1)-th eigenvector of A^{1/2}. Custom metrics remember the sort
/// permutation; `to_internal` / `to_user` convert coordinates.
class DiagonalMetric {
 public:
  /// Const: a_j = 1. Sqrt: a_j = 1/sqrt(j). Linear: a_j = 1/j. (j is 1-based.)
  static DiagonalMetric make(MetricKind kind, std::size_t dim);
  static DiagonalMetric custom(std::vector<double> entries);
  /// One diagonal entry per line; a header line that does not parse is skipped.
  static DiagonalMetric load_csv(const std::filesystem::path& path);

  MetricKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return diag_.size(); }
  std::span<const double> diag() const noexcept { return diag_; }
  double operator[](std::size_t j) const noexcept { return diag_[j]; }

  /// permutation()[i] is the user coordinate stored at internal position i.
  const std::vector<std::size_t>& permutation() const noexcept { return perm_; }
  std::vector<double> to_internal(std::span<const double> user) const;
  std::vector<double> to_user(std::span<const double> internal) const;

 private:
  DiagonalMetric(MetricKind kind, std::vector<double> diag, std::vector<std::size_t> perm);

  MetricKind kind_;
  std::vector<double> diag_;
  std::vector<std::size_t> perm_;
};

double mahalanobis_norm(std::span<const double> v, const DiagonalMetric& metric);

/// G_0..G_d with G_k = sqrt(a_{k+1}) and G_d = 0: the eigenvalues of A^{1/2}
/// bound the gradient of the average Mahalanobis distance outside the
/// top-k eigenspace.
std::vector<double> restricted_coeffs(const DiagonalMetric& metric);

/// Projector onto the span of the k leading eigenvectors of A^{1/2}.
SubspaceProjector top_k_projector(const DiagonalMetric& metric, std::size_t k);

}  // namespace dpsco
