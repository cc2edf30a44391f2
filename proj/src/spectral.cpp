#include "dpsco/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "dpsco/random.hpp"

namespace dpsco {

PowerLawFit powerlaw_fit(std::span<const double> singular_values, std::size_t lo, std::size_t hi) {
  if (lo < 1 || hi > singular_values.size() || lo >= hi) {
    throw std::out_of_range(fmt::format("powerlaw_fit: rank range [{}, {}] invalid for {} values (need 1 <= lo < hi <= len)",
                                        lo, hi, singular_values.size()));
  }
  std::vector<std::size_t> bad;
  for (std::size_t rank = lo; rank <= hi; ++rank) {
    if (!(singular_values[rank - 1] > 0.0)) bad.push_back(rank);
  }
  if (!bad.empty()) {
    throw std::domain_error(fmt::format("powerlaw_fit: nonpositive singular values at ranks {}", fmt::join(bad, ", ")));
  }

  const auto count = static_cast<double>(hi - lo + 1);
  double mean_x = 0.0;
  double mean_y = 0.0;
  for (std::size_t rank = lo; rank <= hi; ++rank) {
    mean_x += std::log(static_cast<double>(rank));
    mean_y += std::log(singular_values[rank - 1]);
  }
  mean_x /= count;
  mean_y /= count;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t rank = lo; rank <= hi; ++rank) {
    const double dx = std::log(static_cast<double>(rank)) - mean_x;
    const double dy = std::log(singular_values[rank - 1]) - mean_y;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  PowerLawFit fit;
  fit.lo = lo;
  fit.hi = hi;
  fit.slope = sxy / sxx;
  fit.intercept = mean_y - fit.slope * mean_x;
  double ss_res = 0.0;
  for (std::size_t rank = lo; rank <= hi; ++rank) {
    const double r = std::log(singular_values[rank - 1]) - (fit.intercept + fit.slope * std::log(static_cast<double>(rank)));
    ss_res += r * r;
  }
  // A constant sequence is fit exactly by a zero slope.
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& Z) {
  const Eigen::Index m = Z.rows();
  const Eigen::Index k = Z.cols();
  Eigen::MatrixXd Q = Z;
  for (int pass = 0; pass < 2; ++pass) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Q);
    Q = qr.householderQ() * Eigen::MatrixXd::Identity(m, k);
  }
  for (Eigen::Index j = 0; j < k; ++j) {
    if (Q.col(j).dot(Z.col(j)) < 0.0) Q.col(j) *= -1.0;
  }
  return Q;
}

namespace {

Eigen::MatrixXd gaussian_start(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  const CounterRng rng(seed);
  Eigen::MatrixXd start(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      start(i, j) = rng.normal(Stream::kInit, static_cast<std::uint64_t>(i), static_cast<std::uint32_t>(j));
    }
  }
  return start;
}

void apply_default_fit(SpectralReport& report) {
  const auto& sv = report.singular_values;
  std::size_t hi = std::min(kMaxFitRank, sv.size());
  const double floor = sv.empty() ? 0.0 : kFitRelativeFloor * sv.front();
  std::size_t usable = 0;
  while (usable < hi && sv[usable] > floor && sv[usable] > 0.0) ++usable;
  hi = usable;
  if (hi >= 2) {
    refit(report, 1, hi);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    report.fit_slope = report.fit_intercept = report.fit_r2 = nan;
    report.fit_lo = report.fit_hi = 0;
  }
}

}  // namespace

SpectralReport orthogonal_iteration_svd(const GradientTrace& trace, std::size_t k, std::size_t iters,
                                        std::uint64_t seed) {
  trace.validate();
  const std::size_t r = trace.rows();
  const std::size_t p = trace.cols();
  if (k < 1 || k > std::min(r, p)) {
    throw std::out_of_range(fmt::format("orthogonal_iteration_svd: k = {} not in [1, min(r, p) = {}]", k, std::min(r, p)));
  }
  if (iters < 1) throw std::invalid_argument("orthogonal_iteration_svd: iters must be >= 1");

  const Eigen::MatrixXd& H = trace.H;
  const bool row_gram = r <= p;
  const Eigen::MatrixXd M = row_gram ? Eigen::MatrixXd(H * H.transpose()) : Eigen::MatrixXd(H.transpose() * H);
  const auto kk = static_cast<Eigen::Index>(k);

  Eigen::MatrixXd Q = orthonormalize(gaussian_start(M.rows(), kk, seed));
  for (std::size_t it = 0; it < iters; ++it) {
    Q = orthonormalize(M * Q);
  }

  const Eigen::MatrixXd projected = Q.transpose() * M * Q;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (projected + projected.transpose()));
  // Eigen returns ascending eigenvalues.
  const Eigen::MatrixXd ritz = Q * eig.eigenvectors().rowwise().reverse();
  const Eigen::VectorXd lambda = eig.eigenvalues().reverse();

  SpectralReport report;
  report.iters = iters;
  report.singular_values.resize(k);
  for (std::size_t i = 0; i < k; ++i) report.singular_values[i] = std::sqrt(std::max(0.0, lambda(static_cast<Eigen::Index>(i))));
  // Keep the order non-increasing after clamping.
  for (std::size_t i = 1; i < k; ++i) {
    report.singular_values[i] = std::min(report.singular_values[i], report.singular_values[i - 1]);
  }
  if (row_gram) {
    // H^T u_i = sigma_i v_i; zero singular values get an arbitrary orthonormal completion.
    report.basis = orthonormalize(H.transpose() * ritz);
  } else {
    report.basis = ritz;
  }
  apply_default_fit(report);
  return report;
}

void refit(SpectralReport& report, std::size_t lo, std::size_t hi) {
  const PowerLawFit fit = powerlaw_fit(report.singular_values, lo, hi);
  report.fit_slope = fit.slope;
  report.fit_intercept = fit.intercept;
  report.fit_r2 = fit.r2;
  report.fit_lo = fit.lo;
  report.fit_hi = fit.hi;
}

SubspaceProjector build_projector_from_report(const SpectralReport& report, std::size_t k) {
  if (k > static_cast<std::size_t>(report.basis.cols())) {
    throw std::out_of_range(fmt::format("build_projector_from_report: k = {} exceeds the {} computed components", k,
                                        report.basis.cols()));
  }
  return SubspaceProjector::dense(report.basis.leftCols(static_cast<Eigen::Index>(k)));
}

IterationSensitivity iteration_sensitivity(const GradientTrace& trace, std::size_t k,
                                           std::span<const std::size_t> iter_counts, std::uint64_t seed,
                                           std::size_t fit_lo, std::size_t fit_hi) {
  IterationSensitivity out;
  for (std::size_t iters : iter_counts) {
    SpectralReport report = orthogonal_iteration_svd(trace, k, iters, seed);
    refit(report, fit_lo, fit_hi);
    out.iters.push_back(iters);
    out.slopes.push_back(report.fit_slope);
  }
  if (!out.slopes.empty()) {
    const auto [mn, mx] = std::minmax_element(out.slopes.begin(), out.slopes.end());
    out.spread = *mx - *mn;
  }
  return out;
}

}  // namespace dpsco
