#include "dpsco/privacy_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace dpsco {

void PrivacyBudget::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 10.0)) throw std::invalid_argument(fmt::format("epsilon = {} not in (0, 10]", epsilon));
  if (!(delta > 0.0 && delta <= 0.5)) throw std::invalid_argument(fmt::format("delta = {} not in (0, 1/2]", delta));
}

double PrivacyBudget::log_term() const { return std::sqrt(std::log(1.0 / delta)); }

double calibrate_sigma(std::uint64_t steps, std::uint64_t n, const PrivacyBudget& budget, double c2) {
  budget.validate();
  if (steps < 1) throw std::invalid_argument("calibrate_sigma: T must be >= 1");
  if (n < 10) throw std::invalid_argument(fmt::format("calibrate_sigma: noise calibration requires n >= 10, got {}", n));
  if (!(c2 > 0.0)) throw std::invalid_argument("calibrate_sigma: c2 must be positive");
  return c2 * std::sqrt(static_cast<double>(steps) * std::log(1.0 / budget.delta)) /
         (budget.epsilon * static_cast<double>(n));
}

std::size_t num_scales(std::size_t k, std::size_t d) {
  if (k < 1 || k > d) throw std::out_of_range(fmt::format("k = {} not in [1, {}]", k, d));
  std::size_t s = 1;
  while ((k << s) <= d) ++s;  // largest m with k 2^m <= d, plus one
  return s;
}

void validate_coeffs(std::span<const double> coeffs) {
  if (coeffs.size() < 2) throw std::invalid_argument("coefficient list needs d + 1 >= 2 entries");
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    if (!std::isfinite(coeffs[j]) || coeffs[j] < 0.0) {
      throw std::invalid_argument(fmt::format("coefficient G_{} = {} must be finite and nonnegative", j, coeffs[j]));
    }
    if (j > 0 && coeffs[j] > coeffs[j - 1]) {
      throw std::invalid_argument(fmt::format("coefficients must be non-increasing (G_{} = {} > G_{} = {})", j, coeffs[j],
                                              j - 1, coeffs[j - 1]));
    }
  }
  if (coeffs.back() != 0.0) throw std::invalid_argument("last coefficient G_d must be 0");
}

double coefficient_tail_sum(std::size_t k, std::span<const double> coeffs) {
  const std::size_t d = coeffs.size() - 1;
  const std::size_t scales = num_scales(k, d);
  double sum = 0.0;
  for (std::size_t s = 1; s <= scales; ++s) {
    const std::size_t index = std::min(k << (s - 1), d);
    const double g = coeffs[index];
    sum += static_cast<double>(s * s) * std::ldexp(1.0, static_cast<int>(s)) * g * g;
  }
  return sum;
}

namespace {

void check_common(std::size_t k, std::size_t d, double D, std::span<const double> coeffs) {
  if (k < 1 || k > d) throw std::out_of_range(fmt::format("k = {} not in [1, d = {}]", k, d));
  if (coeffs.size() != d + 1) {
    throw std::invalid_argument(fmt::format("expected d + 1 = {} coefficients, got {}", d + 1, coeffs.size()));
  }
  validate_coeffs(coeffs);
  if (!(D > 0.0) || !std::isfinite(D)) throw std::invalid_argument("D must be positive");
}

}  // namespace

TheoremParams theorem_params(std::size_t k, std::size_t d, std::uint64_t n, double D, std::span<const double> coeffs,
                             const PrivacyBudget& budget, double c1, double c2) {
  check_common(k, d, D, coeffs);
  budget.validate();
  if (!(c1 > 0.0)) throw std::invalid_argument("c1 must be positive");
  const double g0 = coeffs[0];
  if (!(g0 > 0.0)) throw std::invalid_argument("G_0 must be positive");

  TheoremParams p;
  p.k = k;
  p.S = num_scales(k, d);
  p.c1 = c1;
  p.c2 = c2;
  const double log2d = std::log2(static_cast<double>(d));
  const double nn = static_cast<double>(n);
  const double steps = std::ceil(c1 * (nn * nn + static_cast<double>(d) * log2d * log2d));
  if (!(steps < 0x1.0p53)) throw std::overflow_error("theorem_params: T exceeds 2^53");
  p.T = static_cast<std::uint64_t>(steps);
  p.sigma = calibrate_sigma(p.T, n, budget, c2);
  p.eta = std::sqrt(D * D / (steps * g0 * g0 * static_cast<double>(k) * p.sigma * p.sigma));
  p.alpha = std::sqrt(coefficient_tail_sum(k, coeffs)) / D;

  const double product = p.eta * p.alpha;
  if (product > 0.5) {
    // eta is proportional to 1/c2 and alpha does not depend on it.
    throw std::domain_error(fmt::format(
        "theorem_params: eta * alpha = {:.6g} > 1/2 for k = {}, d = {}, n = {}; use c2 >= {:.6g}", product, k, d, n,
        c2 * product / 0.5));
  }
  return p;
}

namespace {

double erm_bound_unchecked(std::size_t k, std::uint64_t n, double D, std::span<const double> coeffs,
                           const PrivacyBudget& budget, double g0) {
  const double privacy_term =
      g0 * D * std::sqrt(static_cast<double>(k)) * budget.log_term() / (budget.epsilon * static_cast<double>(n));
  return privacy_term + D * std::sqrt(coefficient_tail_sum(k, coeffs));
}

}  // namespace

double erm_bound(std::size_t k, std::size_t d, std::uint64_t n, double D, std::span<const double> coeffs,
                 const PrivacyBudget& budget, double g0) {
  check_common(k, d, D, coeffs);
  budget.validate();
  return erm_bound_unchecked(k, n, D, coeffs, budget, g0);
}

double sco_bound(std::size_t k, std::size_t d, std::uint64_t n, double D, std::span<const double> coeffs,
                 const PrivacyBudget& budget, double g0) {
  return g0 * D / std::sqrt(static_cast<double>(n)) + erm_bound(k, d, n, D, coeffs, budget, g0);
}

std::size_t optimal_k(std::size_t d, std::uint64_t n, const PrivacyBudget& budget, double c) {
  budget.validate();
  if (d < 1) throw std::invalid_argument("optimal_k: d must be >= 1");
  if (!(c > 0.5)) throw std::invalid_argument(fmt::format("optimal_k: decay exponent c = {} must exceed 1/2", c));
  const double ratio = budget.epsilon * static_cast<double>(n) / budget.log_term();
  if (ratio < 1.0) {
    throw std::invalid_argument(fmt::format("optimal_k: requires n >= sqrt(ln(1/delta)) / epsilon, i.e. n >= {:.6g} (n = {})",
                                            budget.log_term() / budget.epsilon, n));
  }
  const double value = std::ceil(std::pow(ratio, 2.0 / (1.0 + 2.0 * c)));
  if (value >= static_cast<double>(d)) return d;
  return std::max<std::size_t>(1, static_cast<std::size_t>(value));
}

double decay_rate_bound(double c, std::uint64_t n, const PrivacyBudget& budget, double g0, double D) {
  budget.validate();
  if (!(c > 0.5)) throw std::invalid_argument(fmt::format("decay_rate_bound: decay exponent c = {} must exceed 1/2", c));
  const double base = budget.log_term() / (budget.epsilon * static_cast<double>(n));
  return g0 * D * std::pow(base, 2.0 * c / (1.0 + 2.0 * c));
}

std::size_t argmin_erm_bound(std::size_t d, std::uint64_t n, double D, std::span<const double> coeffs,
                             const PrivacyBudget& budget, double g0) {
  check_common(1, d, D, coeffs);
  budget.validate();
  std::size_t best = 1;
  double best_value = erm_bound_unchecked(1, n, D, coeffs, budget, g0);
  for (std::size_t k = 2; k <= d; ++k) {
    const double value = erm_bound_unchecked(k, n, D, coeffs, budget, g0);
    if (value < best_value) {
      best = k;
      best_value = value;
    }
  }
  return best;
}

}  // namespace dpsco
