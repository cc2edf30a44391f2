#include "dpsco/projector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dpsco {

SubspaceProjector SubspaceProjector::coordinates(std::size_t dim, std::vector<std::size_t> axes) {
  std::vector<bool> seen(dim, false);
  for (std::size_t a : axes) {
    if (a >= dim) throw std::out_of_range("projector axis " + std::to_string(a) + " >= dim " + std::to_string(dim));
    if (seen[a]) throw std::invalid_argument("projector axis " + std::to_string(a) + " listed twice");
    seen[a] = true;
  }
  SubspaceProjector p;
  p.dim_ = dim;
  p.is_coordinate_ = true;
  p.axes_ = std::move(axes);
  return p;
}

SubspaceProjector SubspaceProjector::dense(Eigen::MatrixXd basis) {
  if (basis.cols() > basis.rows()) throw std::invalid_argument("projector basis has more columns than rows");
  const Eigen::MatrixXd gram = basis.transpose() * basis;
  const double err =
      basis.cols() > 0 ? (gram - Eigen::MatrixXd::Identity(basis.cols(), basis.cols())).cwiseAbs().maxCoeff() : 0.0;
  if (!(err <= 1e-8)) {
    throw std::invalid_argument("projector basis is not orthonormal (max |B^T B - I| = " + std::to_string(err) + ")");
  }
  SubspaceProjector p;
  p.dim_ = static_cast<std::size_t>(basis.rows());
  p.is_coordinate_ = false;
  p.basis_ = std::move(basis);
  return p;
}

std::size_t SubspaceProjector::rank() const noexcept {
  return is_coordinate_ ? axes_.size() : static_cast<std::size_t>(basis_.cols());
}

Eigen::MatrixXd SubspaceProjector::basis() const {
  if (!is_coordinate_) return basis_;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dim_, axes_.size());
  for (std::size_t c = 0; c < axes_.size(); ++c) b(axes_[c], c) = 1.0;
  return b;
}

void SubspaceProjector::apply(std::span<const double> v, std::span<double> out) const {
  if (v.size() != dim_ || out.size() != dim_) throw std::invalid_argument("projector dimension mismatch");
  if (is_coordinate_) {
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t a : axes_) out[a] = v[a];
    return;
  }
  const Eigen::Map<const Eigen::VectorXd> vin(v.data(), v.size());
  Eigen::Map<Eigen::VectorXd> vout(out.data(), out.size());
  const Eigen::VectorXd coeffs = basis_.transpose() * vin;
  vout.noalias() = basis_ * coeffs;
}

std::vector<double> SubspaceProjector::apply(std::span<const double> v) const {
  std::vector<double> out(dim_);
  apply(v, out);
  return out;
}

}  // namespace dpsco
