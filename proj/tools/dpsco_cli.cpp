// Command-line front end: sweep, retrain, trace, spectral, bound.

#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "dpsco/harness.hpp"
#include "dpsco/metrics.hpp"
#include "dpsco/privacy_bounds.hpp"
#include "dpsco/spectral.hpp"
#include "dpsco/trace.hpp"

namespace {

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::vector<std::size_t> default_k_grid(std::size_t d) {
  std::vector<std::size_t> ks;
  for (std::size_t k = 1; k < d; k *= 2) ks.push_back(k);
  ks.push_back(d);
  return ks;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private convex optimization toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::size_t workers = 0;

  auto* sweep = app.add_subcommand("sweep", "Dimension sweep of DP-SGD on the Mahalanobis median benchmark");
  sweep->add_option("--config", config_path, "JSON experiment file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_path, "CSV output ('-' for stdout)")->default_val("-");
  sweep->add_option("--workers", workers, "worker threads (default: DPSCO_WORKERS or all cores)");

  std::vector<std::size_t> retrain_ks;
  auto* retrain = app.add_subcommand("retrain", "Trace, decompose and retrain with projected gradients");
  retrain->add_option("--config", config_path, "JSON experiment file (one metric, one dimension)")
      ->required()
      ->check(CLI::ExistingFile);
  retrain->add_option("--k", retrain_ks, "comma-separated subspace ranks")->delimiter(',')->required();
  retrain->add_option("--out", out_path, "CSV output ('-' for stdout)")->default_val("-");
  retrain->add_option("--workers", workers, "worker threads");

  std::uint64_t trace_seed = 0;
  bool trace_csv = false;
  auto* trace_cmd = app.add_subcommand("trace", "Write the gradient trace of the retrain pipeline's long run");
  trace_cmd->add_option("--config", config_path, "JSON experiment file (one metric, one dimension)")
      ->required()
      ->check(CLI::ExistingFile);
  trace_cmd->add_option("--seed", trace_seed, "run seed")->default_val(0);
  trace_cmd->add_option("--out", out_path, "trace file")->required();
  trace_cmd->add_flag("--csv", trace_csv, "write CSV instead of the binary GTRC format");

  std::string trace_path;
  std::string summary_path;
  std::size_t spec_k = 0;
  std::size_t spec_iters = dpsco::kDefaultOrthIters;
  std::size_t fit_lo = 1;
  std::size_t fit_hi = 0;
  std::uint64_t spec_seed = 0;
  bool robustness = false;
  auto* spectral = app.add_subcommand("spectral", "Singular values of a gradient trace and their power-law fit");
  spectral->add_option("--trace", trace_path, "GTRC binary or CSV trace")->required()->check(CLI::ExistingFile);
  spectral->add_option("--k", spec_k, "number of components (default: min(r, p, 1000))");
  spectral->add_option("--iters", spec_iters, "orthogonal iterations")->default_val(dpsco::kDefaultOrthIters);
  spectral->add_option("--fit-lo", fit_lo, "first fitted rank")->default_val(1);
  spectral->add_option("--fit-hi", fit_hi, "last fitted rank (default: automatic)");
  spectral->add_option("--seed", spec_seed, "start-basis seed")->default_val(0);
  spectral->add_option("--out", out_path, "CSV of (rank, singular_value)")->default_val("-");
  spectral->add_option("--summary", summary_path, "JSON summary path (default: stderr)");
  spectral->add_flag("--robustness", robustness, "also rerun at 10, 50 and 100 iterations and report slope spread");

  std::optional<std::size_t> bound_k;
  bool auto_k = false;
  double bound_c = 1.0;
  double epsilon = 2.0;
  double delta = 1e-6;
  std::uint64_t bound_n = 10000;
  std::size_t bound_d = 1000;
  std::string metric_name = "linear";
  std::string metric_csv;
  double bound_D = 1.0;
  double c1 = dpsco::kDefaultC1;
  double c2 = dpsco::kDefaultC2;
  auto* bound = app.add_subcommand("bound", "Theorem parameters and excess-risk bounds (up to constants)");
  auto* k_opt = bound->add_option("--k", bound_k, "subspace split parameter");
  bound->add_flag("--auto-k", auto_k, "use the closed-form optimal k for decay exponent --c")->excludes(k_opt);
  bound->add_option("--c", bound_c, "coefficient decay exponent, > 1/2")->default_val(1.0);
  bound->add_option("--epsilon", epsilon)->default_val(2.0);
  bound->add_option("--delta", delta)->default_val(1e-6);
  bound->add_option("--n", bound_n, "number of records")->default_val(10000);
  bound->add_option("--d", bound_d, "dimension")->default_val(1000);
  bound->add_option("--metric", metric_name, "const, sqrt or linear")->default_val("linear");
  bound->add_option("--metric-csv", metric_csv, "custom diagonal entries, one per line")->check(CLI::ExistingFile);
  bound->add_option("--D", bound_D, "distance from x0 to the optimum")->default_val(1.0);
  bound->add_option("--c1", c1)->default_val(dpsco::kDefaultC1);
  bound->add_option("--c2", c2)->default_val(dpsco::kDefaultC2);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sweep) {
      dpsco::SweepSpec spec = dpsco::load_sweep_spec(config_path);
      if (workers) spec.workers = workers;
      write_text(out_path, dpsco::format_sweep_csv(dpsco::run_dimension_sweep(spec)));
    } else if (*retrain) {
      dpsco::SweepSpec spec = dpsco::load_sweep_spec(config_path);
      if (workers) spec.workers = workers;
      const auto result = dpsco::run_trace_retrain(spec, retrain_ks);
      write_text(out_path, dpsco::format_retrain_csv(result));
      std::cerr << fmt::format("trace spectrum: {} values, fitted slope {}\n", result.singular_values.size(),
                               dpsco::format_real(result.fit_slope));
    } else if (*trace_cmd) {
      const dpsco::SweepSpec spec = dpsco::load_sweep_spec(config_path);
      const dpsco::GradientTrace trace = dpsco::run_trace_phase(spec, trace_seed);
      if (trace_csv) {
        dpsco::save_trace_csv(trace, out_path);
      } else {
        dpsco::save_trace_binary(trace, out_path);
      }
      std::cerr << fmt::format("wrote {} x {} trace to {}\n", trace.rows(), trace.cols(), out_path);
    } else if (*spectral) {
      const dpsco::GradientTrace trace = dpsco::load_trace(trace_path);
      const std::size_t width = std::min(trace.rows(), trace.cols());
      const std::size_t k = spec_k ? spec_k : std::min(width, dpsco::kMaxFitRank);
      dpsco::SpectralReport report = dpsco::orthogonal_iteration_svd(trace, k, spec_iters, spec_seed);
      if (fit_hi != 0 || fit_lo != 1) {
        dpsco::refit(report, fit_lo, fit_hi ? fit_hi : report.fit_hi);
      }
      std::string csv = "rank,singular_value\n";
      for (std::size_t i = 0; i < report.singular_values.size(); ++i) {
        csv += fmt::format("{},{}\n", i + 1, dpsco::format_real(report.singular_values[i]));
      }
      write_text(out_path, csv);

      nlohmann::ordered_json summary;
      summary["slope"] = report.fit_slope;
      summary["intercept"] = report.fit_intercept;
      summary["r2"] = report.fit_r2;
      summary["iters"] = report.iters;
      summary["fit_lo"] = report.fit_lo;
      summary["fit_hi"] = report.fit_hi;
      summary["k"] = k;
      if (robustness && report.fit_hi >= 2) {
        const std::vector<std::size_t> counts = {10, 50, 100};
        const auto sens = dpsco::iteration_sensitivity(trace, k, counts, spec_seed, report.fit_lo, report.fit_hi);
        summary["robustness"] = {{"iters", sens.iters}, {"slopes", sens.slopes}, {"spread", sens.spread}};
      }
      const std::string text = summary.dump(2) + "\n";
      if (summary_path.empty()) {
        std::cerr << text;
      } else {
        write_text(summary_path, text);
      }
    } else if (*bound) {
      const dpsco::DiagonalMetric metric = metric_csv.empty()
                                               ? dpsco::DiagonalMetric::make(dpsco::parse_metric_kind(metric_name), bound_d)
                                               : dpsco::DiagonalMetric::load_csv(metric_csv);
      const std::size_t d = metric.dim();
      const std::vector<double> coeffs = dpsco::restricted_coeffs(metric);
      const dpsco::PrivacyBudget budget{epsilon, delta};
      std::vector<std::size_t> ks;
      if (bound_k) {
        ks = {*bound_k};
      } else if (auto_k) {
        ks = {dpsco::optimal_k(d, bound_n, budget, bound_c)};
      } else {
        ks = default_k_grid(d);
      }
      std::cout << fmt::format("# metric={} d={} n={} epsilon={} delta={} D={} c1={} c2={}; bounds are up to constants\n",
                               dpsco::to_string(metric.kind()), d, bound_n, epsilon, delta, bound_D, c1, c2);
      std::cout << fmt::format("{:>8} {:>14} {:>14} {:>14} {:>14} {:>14} {:>14}\n", "k", "erm_bound", "sco_bound", "T",
                               "sigma", "eta", "alpha");
      for (std::size_t k : ks) {
        const auto p = dpsco::theorem_params(k, d, bound_n, bound_D, coeffs, budget, c1, c2);
        std::cout << fmt::format("{:>8} {:>14.6g} {:>14.6g} {:>14} {:>14.6g} {:>14.6g} {:>14.6g}\n", k,
                                 dpsco::erm_bound(k, d, bound_n, bound_D, coeffs, budget, coeffs[0]),
                                 dpsco::sco_bound(k, d, bound_n, bound_D, coeffs, budget, coeffs[0]), p.T, p.sigma, p.eta,
                                 p.alpha);
      }
      if (bound_c > 0.5) {
        std::cout << fmt::format("# decay-rate bound (c = {}): {:.6g}\n", bound_c,
                                 dpsco::decay_rate_bound(bound_c, bound_n, budget, coeffs[0], bound_D));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
