#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpsco/metrics.hpp"
#include "dpsco/privacy_bounds.hpp"
#include "dpsco/trace.hpp"

namespace dpsco {

/// Experiment description shared by the sweep, retrain and bound tables.
struct SweepSpec {
  std::vector<std::size_t> dims = {10, 100, 1000};
  std::vector<MetricKind> metrics = {MetricKind::kConst, MetricKind::kSqrt, MetricKind::kLinear};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::size_t n_train = 2000;
  std::size_t n_test = 2000;
  std::size_t d_min = 10;
  PrivacyBudget budget{2.0, 1e-6};
  double c2 = kDefaultC2;

  std::size_t steps = 20000;
  std::optional<double> eta = 0.003;   ///< empty: theorem step size at the bound-minimizing k
  std::optional<double> alpha = 0.15;  ///< empty: theorem ridge strength at that k
  std::optional<double> sigma;         ///< overrides the calibrated noise multiplier
  std::size_t batch_size = 1;
  std::optional<double> clip;
  std::optional<double> D;             ///< distance bound; defaults to sqrt(d_min)

  std::vector<double> eta_grid;        ///< non-empty: pick eta per (metric, d) on validation data
  std::uint64_t validation_seed = 0x5eed;

  std::size_t trace_multiplier = 10;   ///< trace phase runs this many times `steps`
  std::size_t trace_rows = 2000;
  std::size_t orth_iters = 10;
  std::uint64_t spectral_seed = 0;

  std::size_t workers = 0;  ///< 0: DPSCO_WORKERS or hardware concurrency

  void validate() const;
  double distance_bound() const;
};

/// Parses a JSON experiment file. Unknown keys are rejected.
SweepSpec load_sweep_spec(const std::filesystem::path& path);
SweepSpec parse_sweep_spec(const std::string& json_text);

struct SweepRow {
  MetricKind metric;
  std::size_t d;
  std::uint64_t seed;
  std::size_t steps;
  double eta;
  double alpha;
  double sigma;
  double emp_loss;
  double pop_loss;
};

struct SweepAggregate {
  MetricKind metric;
  std::size_t d;
  std::size_t steps;
  double eta;
  double alpha;
  double sigma;
  double emp_mean;
  double emp_std;  ///< sample standard deviation; 0 for a single seed
  double pop_mean;
  double pop_std;
};

struct SweepResult {
  std::vector<SweepRow> runs;              ///< sorted by (metric, d, seed)
  std::vector<SweepAggregate> aggregates;  ///< sorted by (metric, d)
};

/// Seeds of the data splits and of the optimizer for one run.
std::uint64_t train_data_seed(std::uint64_t seed);
std::uint64_t test_data_seed(std::uint64_t seed);
std::uint64_t optimizer_seed(std::uint64_t seed);

SweepResult run_dimension_sweep(const SweepSpec& spec);

/// Fixed schema, 9 significant digits, C-locale formatting.
std::string format_sweep_csv(const SweepResult& result);

struct RetrainRow {
  MetricKind metric;
  std::size_t d;
  std::uint64_t seed;
  std::optional<std::size_t> k;  ///< empty for the unprojected baseline
  double emp_loss;
  double pop_loss;
  double rel_change;  ///< (emp_loss - baseline) / baseline
};

struct RetrainResult {
  std::vector<RetrainRow> rows;
  std::vector<double> singular_values;  ///< spectrum of the first seed's trace
  double fit_slope = 0.0;
};

/// The traced long run of the retrain pipeline for the first configured metric and dimension.
GradientTrace run_trace_phase(const SweepSpec& spec, std::uint64_t seed);

/// Trace a long private run, decompose the trace, then rerun from x0 with the
/// averaged gradient projected onto the top-k components for each k.
RetrainResult run_trace_retrain(const SweepSpec& spec, const std::vector<std::size_t>& k_list);
std::string format_retrain_csv(const RetrainResult& result);

/// A named coefficient sequence G_0..G_d.
struct BoundCase {
  std::string name;
  std::vector<double> coeffs;
};

struct BoundRow {
  std::string name;
  std::size_t d;
  double c;
  std::size_t k_formula;  ///< closed-form optimal k for decay exponent c
  std::size_t k_scan;     ///< brute-force minimizer of the empirical bound
  double erm_at_scan;
  double sco_at_scan;
  double erm_at_formula;
  double decay_bound;
};

/// One row per (case, c); throws for c <= 1/2.
std::vector<BoundRow> tabulate_bounds(const std::vector<BoundCase>& cases, std::uint64_t n, const PrivacyBudget& budget,
                                      double D, const std::vector<double>& c_values);
/// Cases for every configured (metric, d).
std::vector<BoundRow> tabulate_bounds(const SweepSpec& spec, const std::vector<double>& c_values);
std::string format_bounds_csv(const std::vector<BoundRow>& rows);

/// Worker count from DPSCO_WORKERS, else hardware concurrency (at least 1).
std::size_t default_worker_count();

/// Formats with 9 significant digits, independent of the global locale.
std::string format_real(double value);

}  // namespace dpsco
