#include "dpsco/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "dpsco/losses.hpp"
#include "dpsco/optimizer.hpp"
#include "dpsco/spectral.hpp"

namespace dpsco {
namespace {

using nlohmann::json;

/// Runs fn(i) for i in [0, count) on a bounded pool. The first failure (by
/// index) is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t count, std::size_t workers, Fn fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::size_t resolve_workers(const SweepSpec& spec) { return spec.workers ? spec.workers : default_worker_count(); }

/// Hyperparameters shared by every seed of one (metric, d) cell.
struct CellParams {
  std::size_t steps;
  double eta;
  double alpha;
  double sigma;
  double g0;
};

struct Cell {
  MetricKind metric;
  std::size_t d;
};

struct RunLosses {
  double emp;
  double pop;
};

std::string coords(MetricKind metric, std::size_t d, std::uint64_t seed) {
  return fmt::format("metric={} d={} seed={}", to_string(metric), d, seed);
}

SgdConfig make_config(const SweepSpec& spec, const CellParams& p, std::uint64_t seed) {
  SgdConfig config;
  config.steps = p.steps;
  config.eta = p.eta;
  config.alpha = p.alpha;
  config.sigma = p.sigma;
  config.g0 = p.g0;
  config.batch_size = spec.batch_size;
  config.clip = spec.clip;
  config.seed = optimizer_seed(seed);
  return config;
}

RunLosses run_once(const SweepSpec& spec, MetricKind kind, std::size_t d, std::uint64_t seed, const CellParams& p) {
  const DiagonalMetric metric = DiagonalMetric::make(kind, d);
  const MedianDataset train = generate_low_rank_data(spec.n_train, d, spec.d_min, train_data_seed(seed), Split::kTrain);
  const MedianDataset test = generate_low_rank_data(spec.n_test, d, spec.d_min, test_data_seed(seed), Split::kTest);
  const std::vector<double> x0(d, 0.0);
  const RunResult run = dpsgd_run(make_config(spec, p, seed), train, metric, x0);
  return {run.final_empirical_loss, estimate_population_loss(run.xbar, test, metric)};
}

/// Step size and ridge strength before any grid search.
CellParams base_params(const SweepSpec& spec, MetricKind kind, std::size_t d) {
  const DiagonalMetric metric = DiagonalMetric::make(kind, d);
  const std::vector<double> coeffs = restricted_coeffs(metric);
  CellParams p;
  p.steps = spec.steps;
  p.g0 = coeffs[0];
  p.sigma = spec.sigma ? *spec.sigma : calibrate_sigma(spec.steps, spec.n_train, spec.budget, spec.c2);
  if (spec.eta && spec.alpha) {
    p.eta = *spec.eta;
    p.alpha = *spec.alpha;
    return p;
  }
  const double D = spec.distance_bound();
  const std::size_t k = argmin_erm_bound(d, spec.n_train, D, coeffs, spec.budget, p.g0);
  if (spec.eta) {
    p.eta = *spec.eta;
  } else {
    if (!(p.sigma > 0.0)) throw std::invalid_argument("eta = \"auto\" needs a positive noise multiplier");
    p.eta = D / (p.g0 * p.sigma * std::sqrt(static_cast<double>(p.steps) * static_cast<double>(k)));
  }
  p.alpha = spec.alpha ? *spec.alpha : std::sqrt(coefficient_tail_sum(k, coeffs)) / D;
  return p;
}

/// Resolves per-cell hyperparameters, grid-searching eta on validation data if requested.
std::vector<CellParams> resolve_cells(const SweepSpec& spec, const std::vector<Cell>& cells) {
  std::vector<CellParams> params(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    try {
      params[c] = base_params(spec, cells[c].metric, cells[c].d);
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("cell metric={} d={}: {}", to_string(cells[c].metric), cells[c].d, e.what()));
    }
  }
  if (spec.eta_grid.empty()) return params;

  const std::size_t g = spec.eta_grid.size();
  std::vector<double> scores(cells.size() * g);
  parallel_for(scores.size(), resolve_workers(spec), [&](std::size_t task) {
    const Cell& cell = cells[task / g];
    CellParams p = params[task / g];
    p.eta = spec.eta_grid[task % g];
    try {
      scores[task] = run_once(spec, cell.metric, cell.d, spec.validation_seed, p).pop;
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("eta search {} eta={}: {}", coords(cell.metric, cell.d, spec.validation_seed),
                                           p.eta, e.what()));
    }
  });
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < g; ++i) {
      if (scores[c * g + i] < scores[c * g + best]) best = i;
    }
    params[c].eta = spec.eta_grid[best];
  }
  return params;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<Cell> sorted_cells(const SweepSpec& spec) {
  std::vector<MetricKind> metrics = spec.metrics;
  std::sort(metrics.begin(), metrics.end());
  std::vector<std::size_t> dims = spec.dims;
  std::sort(dims.begin(), dims.end());
  std::vector<Cell> cells;
  for (MetricKind m : metrics) {
    for (std::size_t d : dims) cells.push_back({m, d});
  }
  return cells;
}

template <class T>
T json_get(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

/// number, "auto" (-> empty) or absent (-> fallback).
std::optional<double> json_auto(const json& j, const char* key, std::optional<double> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_string()) {
    if (v.get<std::string>() != "auto") throw std::invalid_argument(fmt::format("'{}' must be a number or \"auto\"", key));
    return std::nullopt;
  }
  return v.get<double>();
}

std::optional<double> json_nullable(const json& j, const char* key, std::optional<double> fallback) {
  if (!j.contains(key)) return fallback;
  if (j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::size_t trace_interval(const SweepSpec& spec) {
  return std::max<std::size_t>(1, spec.trace_multiplier * spec.steps / spec.trace_rows);
}

std::size_t trace_row_count(const SweepSpec& spec) { return spec.trace_multiplier * spec.steps / trace_interval(spec); }

/// The over-trained private run whose averaged gradients feed the decomposition.
GradientTrace traced_run(const SweepSpec& spec, const CellParams& p, const MedianDataset& train,
                         const DiagonalMetric& metric, std::uint64_t seed) {
  SgdConfig config = make_config(spec, p, seed);
  config.steps = spec.trace_multiplier * spec.steps;
  config.trace_every = trace_interval(spec);
  const std::vector<double> x0(metric.dim(), 0.0);
  return collect_gradient_trace(dpsgd_run(config, train, metric, x0));
}

}  // namespace

void SweepSpec::validate() const {
  if (dims.empty() || metrics.empty() || seeds.empty()) throw std::invalid_argument("sweep needs dims, metrics and seeds");
  if (d_min < 1) throw std::invalid_argument("d_min must be >= 1");
  for (std::size_t d : dims) {
    if (d < d_min) throw std::invalid_argument(fmt::format("dimension {} is below d_min = {}", d, d_min));
  }
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw std::invalid_argument("seeds must be distinct");
  }
  if (std::set<std::size_t>(dims.begin(), dims.end()).size() != dims.size()) throw std::invalid_argument("dims must be distinct");
  if (std::set<MetricKind>(metrics.begin(), metrics.end()).size() != metrics.size()) {
    throw std::invalid_argument("metrics must be distinct");
  }
  for (MetricKind m : metrics) {
    if (m == MetricKind::kCustom) throw std::invalid_argument("sweeps support const, sqrt and linear metrics");
  }
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("n_train and n_test must be >= 1");
  budget.validate();
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (batch_size < 1 || batch_size > n_train) throw std::invalid_argument("batch_size must lie in [1, n_train]");
  if (eta && !(*eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (alpha && !(*alpha >= 0.0)) throw std::invalid_argument("alpha must be nonnegative");
  if (sigma && !(*sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
  for (double e : eta_grid) {
    if (!(e > 0.0)) throw std::invalid_argument("eta_grid entries must be positive");
  }
  if (trace_multiplier < 1 || trace_rows < 1 || orth_iters < 1) {
    throw std::invalid_argument("trace_multiplier, trace_rows and orth_iters must be >= 1");
  }
}

double SweepSpec::distance_bound() const { return D ? *D : std::sqrt(static_cast<double>(d_min)); }

SweepSpec parse_sweep_spec(const std::string& json_text) {
  const json j = json::parse(json_text);
  static const std::set<std::string> known = {
      "dims", "metrics", "seeds", "n_train", "n_test", "d_min", "epsilon", "delta", "c2", "steps", "eta", "alpha",
      "sigma", "batch_size", "clip", "D", "eta_grid", "validation_seed", "trace_multiplier", "trace_rows", "orth_iters",
      "spectral_seed", "workers"};
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw std::invalid_argument("unknown config key '" + item.key() + "'");
  }
  SweepSpec spec;
  spec.dims = json_get(j, "dims", spec.dims);
  if (j.contains("metrics")) {
    spec.metrics.clear();
    for (const auto& m : j.at("metrics")) spec.metrics.push_back(parse_metric_kind(m.get<std::string>()));
  }
  spec.seeds = json_get(j, "seeds", spec.seeds);
  spec.n_train = json_get(j, "n_train", spec.n_train);
  spec.n_test = json_get(j, "n_test", spec.n_test);
  spec.d_min = json_get(j, "d_min", spec.d_min);
  spec.budget.epsilon = json_get(j, "epsilon", spec.budget.epsilon);
  spec.budget.delta = json_get(j, "delta", spec.budget.delta);
  spec.c2 = json_get(j, "c2", spec.c2);
  spec.steps = json_get(j, "steps", spec.steps);
  spec.eta = json_auto(j, "eta", spec.eta);
  spec.alpha = json_auto(j, "alpha", spec.alpha);
  spec.sigma = json_nullable(j, "sigma", spec.sigma);
  spec.batch_size = json_get(j, "batch_size", spec.batch_size);
  spec.clip = json_nullable(j, "clip", spec.clip);
  spec.D = json_nullable(j, "D", spec.D);
  spec.eta_grid = json_get(j, "eta_grid", spec.eta_grid);
  spec.validation_seed = json_get(j, "validation_seed", spec.validation_seed);
  spec.trace_multiplier = json_get(j, "trace_multiplier", spec.trace_multiplier);
  spec.trace_rows = json_get(j, "trace_rows", spec.trace_rows);
  spec.orth_iters = json_get(j, "orth_iters", spec.orth_iters);
  spec.spectral_seed = json_get(j, "spectral_seed", spec.spectral_seed);
  spec.workers = json_get(j, "workers", spec.workers);
  spec.validate();
  return spec;
}

SweepSpec load_sweep_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_sweep_spec(ss.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::uint64_t train_data_seed(std::uint64_t seed) { return derive_seed(seed, 0); }
std::uint64_t test_data_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
std::uint64_t optimizer_seed(std::uint64_t seed) { return derive_seed(seed, 2); }

SweepResult run_dimension_sweep(const SweepSpec& spec) {
  spec.validate();
  const std::vector<Cell> cells = sorted_cells(spec);
  const std::vector<CellParams> params = resolve_cells(spec, cells);
  std::vector<std::uint64_t> seeds = spec.seeds;
  std::sort(seeds.begin(), seeds.end());

  const std::size_t per_cell = seeds.size();
  std::vector<RunLosses> losses(cells.size() * per_cell);
  parallel_for(losses.size(), resolve_workers(spec), [&](std::size_t task) {
    const Cell& cell = cells[task / per_cell];
    const std::uint64_t seed = seeds[task % per_cell];
    try {
      losses[task] = run_once(spec, cell.metric, cell.d, seed, params[task / per_cell]);
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("run {}: {}", coords(cell.metric, cell.d, seed), e.what()));
    }
  });

  SweepResult result;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const CellParams& p = params[c];
    std::vector<double> emp;
    std::vector<double> pop;
    for (std::size_t s = 0; s < per_cell; ++s) {
      const RunLosses& l = losses[c * per_cell + s];
      result.runs.push_back({cells[c].metric, cells[c].d, seeds[s], p.steps, p.eta, p.alpha, p.sigma, l.emp, l.pop});
      emp.push_back(l.emp);
      pop.push_back(l.pop);
    }
    const double emp_mean = mean_of(emp);
    const double pop_mean = mean_of(pop);
    result.aggregates.push_back({cells[c].metric, cells[c].d, p.steps, p.eta, p.alpha, p.sigma, emp_mean,
                                 sample_std(emp, emp_mean), pop_mean, sample_std(pop, pop_mean)});
  }
  return result;
}

std::string format_real(double value) { return fmt::format("{:.9g}", value); }

std::string format_sweep_csv(const SweepResult& result) {
  std::string out = "metric,d,seed,T,eta,alpha,sigma,emp_loss,pop_loss,emp_mean,emp_std,pop_mean,pop_std\n";
  std::size_t r = 0;
  for (const SweepAggregate& agg : result.aggregates) {
    for (; r < result.runs.size() && result.runs[r].metric == agg.metric && result.runs[r].d == agg.d; ++r) {
      const SweepRow& row = result.runs[r];
      out += fmt::format("{},{},{},{},{},{},{},{},{},,,,\n", to_string(row.metric), row.d, row.seed, row.steps,
                         format_real(row.eta), format_real(row.alpha), format_real(row.sigma), format_real(row.emp_loss),
                         format_real(row.pop_loss));
    }
    out += fmt::format("{},{},AGG,{},{},{},{},,,{},{},{},{}\n", to_string(agg.metric), agg.d, agg.steps,
                       format_real(agg.eta), format_real(agg.alpha), format_real(agg.sigma), format_real(agg.emp_mean),
                       format_real(agg.emp_std), format_real(agg.pop_mean), format_real(agg.pop_std));
  }
  return out;
}

GradientTrace run_trace_phase(const SweepSpec& spec, std::uint64_t seed) {
  spec.validate();
  const MetricKind kind = spec.metrics.front();
  const std::size_t d = spec.dims.front();
  const CellParams p = resolve_cells(spec, {{kind, d}}).front();
  const DiagonalMetric metric = DiagonalMetric::make(kind, d);
  const MedianDataset train = generate_low_rank_data(spec.n_train, d, spec.d_min, train_data_seed(seed));
  return traced_run(spec, p, train, metric, seed);
}

RetrainResult run_trace_retrain(const SweepSpec& spec, const std::vector<std::size_t>& k_list) {
  spec.validate();
  if (spec.metrics.size() != 1 || spec.dims.size() != 1) {
    throw std::invalid_argument("retrain needs exactly one metric and one dimension in the config");
  }
  if (k_list.empty()) throw std::invalid_argument("retrain needs at least one k");
  const MetricKind kind = spec.metrics.front();
  const std::size_t d = spec.dims.front();
  const std::size_t k_max = *std::max_element(k_list.begin(), k_list.end());
  const std::size_t rows = trace_row_count(spec);
  if (k_max > std::min(rows, d)) {
    throw std::invalid_argument(fmt::format("k = {} exceeds the trace width min(r = {}, p = {})", k_max, rows, d));
  }
  const CellParams p = resolve_cells(spec, {{kind, d}}).front();
  std::vector<std::uint64_t> seeds = spec.seeds;
  std::sort(seeds.begin(), seeds.end());

  struct SeedOutcome {
    std::vector<RetrainRow> rows;
    std::vector<double> singular_values;
    double slope = 0.0;
  };
  std::vector<SeedOutcome> outcomes(seeds.size());
  parallel_for(seeds.size(), resolve_workers(spec), [&](std::size_t s) {
    const std::uint64_t seed = seeds[s];
    try {
      const DiagonalMetric metric = DiagonalMetric::make(kind, d);
      const MedianDataset train = generate_low_rank_data(spec.n_train, d, spec.d_min, train_data_seed(seed));
      const MedianDataset test = generate_low_rank_data(spec.n_test, d, spec.d_min, test_data_seed(seed), Split::kTest);
      const std::vector<double> x0(d, 0.0);

      const GradientTrace trace = traced_run(spec, p, train, metric, seed);
      const SpectralReport report = orthogonal_iteration_svd(trace, k_max, spec.orth_iters, spec.spectral_seed);

      const SgdConfig config = make_config(spec, p, seed);
      const RunResult baseline = dpsgd_run(config, train, metric, x0);
      const double base_emp = baseline.final_empirical_loss;
      SeedOutcome& out = outcomes[s];
      out.rows.push_back({kind, d, seed, std::nullopt, base_emp, estimate_population_loss(baseline.xbar, test, metric), 0.0});
      for (std::size_t k : k_list) {
        const SubspaceProjector projector = build_projector_from_report(report, k);
        const RunResult run = dpsgd_run(config, train, metric, x0, &projector);
        out.rows.push_back({kind, d, seed, k, run.final_empirical_loss, estimate_population_loss(run.xbar, test, metric),
                            (run.final_empirical_loss - base_emp) / base_emp});
      }
      out.singular_values = report.singular_values;
      out.slope = report.fit_slope;
    } catch (const std::exception& e) {
      throw std::runtime_error(fmt::format("retrain {}: {}", coords(kind, d, seed), e.what()));
    }
  });

  RetrainResult result;
  for (auto& o : outcomes) result.rows.insert(result.rows.end(), o.rows.begin(), o.rows.end());
  result.singular_values = outcomes.front().singular_values;
  result.fit_slope = outcomes.front().slope;
  return result;
}

std::string format_retrain_csv(const RetrainResult& result) {
  std::string out = "metric,d,seed,k,emp_loss,pop_loss,rel_change\n";
  for (const RetrainRow& row : result.rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", to_string(row.metric), row.d, row.seed,
                       row.k ? std::to_string(*row.k) : std::string("full"), format_real(row.emp_loss),
                       format_real(row.pop_loss), format_real(row.rel_change));
  }
  return out;
}

std::vector<BoundRow> tabulate_bounds(const std::vector<BoundCase>& cases, std::uint64_t n, const PrivacyBudget& budget,
                                      double D, const std::vector<double>& c_values) {
  std::vector<BoundRow> rows;
  for (const BoundCase& bc : cases) {
    validate_coeffs(bc.coeffs);
    const std::size_t d = bc.coeffs.size() - 1;
    const double g0 = bc.coeffs.front();
    const std::size_t k_scan = argmin_erm_bound(d, n, D, bc.coeffs, budget, g0);
    const double erm_scan = erm_bound(k_scan, d, n, D, bc.coeffs, budget, g0);
    const double sco_scan = sco_bound(k_scan, d, n, D, bc.coeffs, budget, g0);
    for (double c : c_values) {
      const std::size_t k_formula = optimal_k(d, n, budget, c);
      rows.push_back({bc.name, d, c, k_formula, k_scan, erm_scan, sco_scan,
                      erm_bound(k_formula, d, n, D, bc.coeffs, budget, g0), decay_rate_bound(c, n, budget, g0, D)});
    }
  }
  return rows;
}

std::vector<BoundRow> tabulate_bounds(const SweepSpec& spec, const std::vector<double>& c_values) {
  std::vector<BoundCase> cases;
  for (const Cell& cell : sorted_cells(spec)) {
    cases.push_back({std::string(to_string(cell.metric)), restricted_coeffs(DiagonalMetric::make(cell.metric, cell.d))});
  }
  return tabulate_bounds(cases, spec.n_train, spec.budget, spec.distance_bound(), c_values);
}

std::string format_bounds_csv(const std::vector<BoundRow>& rows) {
  std::string out = "case,d,c,k_formula,k_scan,erm_at_scan,sco_at_scan,erm_at_formula,decay_bound\n";
  for (const BoundRow& r : rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.name, r.d, format_real(r.c), r.k_formula, r.k_scan,
                       format_real(r.erm_at_scan), format_real(r.sco_at_scan), format_real(r.erm_at_formula),
                       format_real(r.decay_bound));
  }
  return out;
}

std::size_t default_worker_count() {
  if (const char* env = std::getenv("DPSCO_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw std::invalid_argument(fmt::format("DPSCO_WORKERS='{}' is not a positive integer", env));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace dpsco
