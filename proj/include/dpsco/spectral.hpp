#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dpsco/projector.hpp"
#include "dpsco/trace.hpp"

namespace dpsco {

inline constexpr std::size_t kDefaultOrthIters = 10;
inline constexpr std::size_t kMaxFitRank = 1000;
/// Singular values below this fraction of the largest are left out of fits.
inline constexpr double kFitRelativeFloor = 1e-12;

/// Ordinary least squares of ln(value) against ln(rank) over ranks [lo, hi].
struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  std::size_t lo = 1;
  std::size_t hi = 1;
};

struct SpectralReport {
  std::vector<double> singular_values;  ///< non-increasing
  Eigen::MatrixXd basis;                ///< p x k right singular vectors
  double fit_slope = 0.0;               ///< decay exponent c = -fit_slope
  double fit_intercept = 0.0;
  double fit_r2 = 0.0;
  std::size_t fit_lo = 0;  ///< 0 when no fit was possible
  std::size_t fit_hi = 0;
  std::size_t iters = 0;
};

/// Fits ranks lo..hi (1-based, inclusive). Throws if any value in range is not
/// strictly positive, listing the offending ranks.
PowerLawFit powerlaw_fit(std::span<const double> singular_values, std::size_t lo, std::size_t hi);

/// Orthonormal columns spanning range(Z), by Householder QR applied twice.
/// Column signs follow diag(Q^T Z) so that a nearly orthonormal Z is kept.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& Z);

/// Top-k singular triplets of H by orthogonal iteration on the smaller Gram
/// matrix (H H^T when r <= p, else H^T H): Q <- orth(M Q), `iters` times from
/// a seeded Gaussian start, then a Rayleigh-Ritz step on Q^T M Q.
/// The report's fit covers ranks 1..min(kMaxFitRank, k), truncated before the
/// first value under kFitRelativeFloor * sigma_1.
SpectralReport orthogonal_iteration_svd(const GradientTrace& trace, std::size_t k,
                                        std::size_t iters = kDefaultOrthIters, std::uint64_t seed = 0);

/// Refits a report over an explicit rank range.
void refit(SpectralReport& report, std::size_t lo, std::size_t hi);

/// Projector onto the first k principal directions of a report.
SubspaceProjector build_projector_from_report(const SpectralReport& report, std::size_t k);

struct IterationSensitivity {
  std::vector<std::size_t> iters;
  std::vector<double> slopes;
  double spread = 0.0;  ///< max slope - min slope
};

/// Reruns the decomposition for each iteration count and compares fitted slopes.
IterationSensitivity iteration_sensitivity(const GradientTrace& trace, std::size_t k,
                                           std::span<const std::size_t> iter_counts, std::uint64_t seed,
                                           std::size_t fit_lo, std::size_t fit_hi);

}  // namespace dpsco
