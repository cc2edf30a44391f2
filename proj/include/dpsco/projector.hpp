#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace dpsco {

/// Orthogonal projection onto a k-dimensional subspace of R^d.
///
/// Two representations share one interface: a coordinate mask (the span of
/// selected axes, applied exactly in O(d)) and a dense d x k basis with
/// orthonormal columns (applied as B (B^T v)).
class SubspaceProjector {
 public:
  /// Span of the listed coordinate axes; indices must be distinct and < dim.
  static SubspaceProjector coordinates(std::size_t dim, std::vector<std::size_t> axes);

  /// Span of the columns of `basis`, which must be orthonormal within 1e-8.
  static SubspaceProjector dense(Eigen::MatrixXd basis);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rank() const noexcept;
  bool is_coordinate() const noexcept { return is_coordinate_; }
  const std::vector<std::size_t>& axes() const noexcept { return axes_; }

  /// d x k orthonormal basis; materialized for coordinate projectors.
  Eigen::MatrixXd basis() const;

  /// out = P v. `out` may not alias `v`.
  void apply(std::span<const double> v, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> v) const;

 private:
  SubspaceProjector() = default;

  std::size_t dim_ = 0;
  bool is_coordinate_ = true;
  std::vector<std::size_t> axes_;
  Eigen::MatrixXd basis_;
};

}  // namespace dpsco
