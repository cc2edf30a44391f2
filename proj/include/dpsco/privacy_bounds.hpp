#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace dpsco {

/// Defaults for the unspecified constants in the noise calibration and the
/// step-count schedule. c2 = 32 keeps eta * alpha <= 1/2 over the full
/// hypothesis range (epsilon <= 10, delta <= 1/2, n >= 10) for d up to 1e7.
inline constexpr double kDefaultC1 = 1.0;
inline constexpr double kDefaultC2 = 32.0;

/// (epsilon, delta) with epsilon in (0, 10] and delta in (0, 1/2].
struct PrivacyBudget {
  double epsilon = 2.0;
  double delta = 1e-6;

  void validate() const;
  /// sqrt(ln(1/delta)); the natural log is used throughout.
  double log_term() const;
};

/// c2 * sqrt(T ln(1/delta)) / (epsilon n). Requires n >= 10.
double calibrate_sigma(std::uint64_t steps, std::uint64_t n, const PrivacyBudget& budget, double c2 = kDefaultC2);

/// Hyperparameters prescribed for a split parameter k.
struct TheoremParams {
  std::size_t k = 1;
  std::size_t S = 1;  ///< floor(log2(d / k)) + 1
  std::uint64_t T = 1;
  double sigma = 0.0;
  double eta = 0.0;
  double alpha = 0.0;
  double c1 = kDefaultC1;
  double c2 = kDefaultC2;
};

/// floor(log2(d / k)) + 1, computed in integers.
std::size_t num_scales(std::size_t k, std::size_t d);

/// sum_{s=1}^{S} s^2 2^s G_{min(2^{s-1} k, d)}^2.
double coefficient_tail_sum(std::size_t k, std::span<const double> coeffs);

/// Checks length d+1, finiteness, nonnegativity, monotonicity and G_d = 0.
void validate_coeffs(std::span<const double> coeffs);

/// T = ceil(c1 (n^2 + d log2^2 d)), sigma from calibrate_sigma,
/// eta = sqrt(D^2 / (T G0^2 k sigma^2)), alpha = sqrt(tail sum) / D.
/// Throws std::domain_error, suggesting a sufficient c2, if eta * alpha > 1/2.
TheoremParams theorem_params(std::size_t k, std::size_t d, std::uint64_t n, double D, std::span<const double> coeffs,
                             const PrivacyBudget& budget, double c1 = kDefaultC1, double c2 = kDefaultC2);

/// G0 D sqrt(k ln(1/delta)) / (epsilon n) + D sqrt(tail sum); constants suppressed.
double erm_bound(std::size_t k, std::size_t d, std::uint64_t n, double D, std::span<const double> coeffs,
                 const PrivacyBudget& budget, double g0);

/// erm_bound plus the sampling term G0 D / sqrt(n).
double sco_bound(std::size_t k, std::size_t d, std::uint64_t n, double D, std::span<const double> coeffs,
                 const PrivacyBudget& budget, double g0);

/// min{d, ceil((epsilon n / sqrt(ln(1/delta)))^{2/(1+2c)})} for c > 1/2,
/// assuming n >= sqrt(ln(1/delta)) / epsilon.
std::size_t optimal_k(std::size_t d, std::uint64_t n, const PrivacyBudget& budget, double c);

/// G0 D (sqrt(ln(1/delta)) / (epsilon n))^{2c/(1+2c)}, constants suppressed.
double decay_rate_bound(double c, std::uint64_t n, const PrivacyBudget& budget, double g0, double D);

/// Smallest k in [1, d] minimizing erm_bound.
std::size_t argmin_erm_bound(std::size_t d, std::uint64_t n, double D, std::span<const double> coeffs,
                             const PrivacyBudget& budget, double g0);

}  // namespace dpsco
