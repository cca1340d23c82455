#pragma once

// End-to-end experiments: prior on the source, then per repetition a 50/50
// query/test split of the target, active learning up to the largest budget,
// MAP width selection at every budget and evaluation on the test half.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mapcx/active.hpp"
#include "mapcx/adapt.hpp"
#include "mapcx/capacity.hpp"
#include "mapcx/dataset.hpp"
#include "mapcx/learner.hpp"
#include "mapcx/parallel.hpp"
#include "mapcx/prior.hpp"

namespace mapcx {

struct ExperimentSpec {
  // Either a synthetic pair or two CSV files (the target's labels stay hidden).
  std::optional<ShiftSpec> synthetic;
  std::string source_path;
  std::string target_path;
  std::string label_column = "label";

  PriorConfig prior_config{};
  std::optional<ComplexityPrior> prior;  // reuse instead of estimating
  std::size_t initial_size = 10;
  std::size_t batch_per_query = 1;
  NetConfig net_template{};
  double alpha = 1.0;
  double delta = 0.05;
  std::vector<std::size_t> budgets{100};
  std::size_t repetitions = 10;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const {
    if (repetitions < 1) throw Error("experiment: repetitions must be >= 1");
    if (budgets.empty()) throw Error("experiment: at least one budget is required");
    if (!std::is_sorted(budgets.begin(), budgets.end()))
      throw Error("experiment: budgets must be sorted ascending");
    if (!synthetic && (source_path.empty() || target_path.empty()))
      throw Error("experiment: need a synthetic spec or both source and target paths");
  }
};

struct ResolvedData {
  LabeledTable source;
  UnlabeledTable target;
};

inline ResolvedData resolve_data(const ExperimentSpec& spec) {
  if (spec.synthetic) {
    auto [s, t] = make_shifted_pair(*spec.synthetic);
    return {std::move(s), std::move(t)};
  }
  LabeledTable source = load_csv(spec.source_path, spec.label_column);
  UnlabeledTable target = hide_labels(load_csv(spec.target_path, spec.label_column));
  if (source.n_features() != target.n_features())
    throw Error("source and target feature counts differ");
  if (source.class_count() != target.class_count())
    throw Error("source and target class counts differ");
  return {std::move(source), std::move(target)};
}

struct RunRow {
  std::size_t budget = 0;
  std::size_t repetition = 0;
  double accuracy = 0.0;          // final model of the method under test
  std::size_t theta = 0;          // theta* (MAP) or the fixed theta
  double al_accuracy = 0.0;       // querying-width model on the same labeled rows
  double source_accuracy = 0.0;   // source-direct baseline on this repetition's test half
  std::size_t labeled_size = 0;
  double active_seconds = 0.0;    // whole query loop of the repetition (shared across budgets)
  double adapt_seconds = 0.0;
};

struct BudgetAggregate {
  std::size_t budget = 0;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  double mean_source_accuracy = 0.0;
  double mean_al_accuracy = 0.0;
};

struct RunReport {
  std::string method;  // "map" or "fixed_theta"
  std::optional<ComplexityPrior> prior;
  std::size_t query_theta = 0;
  double prior_seconds = 0.0;
  std::vector<RunRow> rows;
  std::vector<BudgetAggregate> aggregates;
};

/// Mean and sample standard deviation (n - 1 denominator; 0 for a single value).
inline std::pair<double, double> mean_and_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

inline std::vector<BudgetAggregate> aggregate(const std::vector<RunRow>& rows) {
  std::map<std::size_t, std::vector<const RunRow*>> by_budget;
  for (const auto& r : rows) by_budget[r.budget].push_back(&r);
  std::vector<BudgetAggregate> out;
  for (const auto& [budget, group] : by_budget) {
    std::vector<double> acc, src, al;
    for (const RunRow* r : group) {
      acc.push_back(r->accuracy);
      src.push_back(r->source_accuracy);
      al.push_back(r->al_accuracy);
    }
    BudgetAggregate a;
    a.budget = budget;
    std::tie(a.mean_accuracy, a.std_accuracy) = mean_and_std(acc);
    a.mean_source_accuracy = mean_and_std(src).first;
    a.mean_al_accuracy = mean_and_std(al).first;
    out.push_back(a);
  }
  return out;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

enum class Method { map, fixed_theta };

inline RunReport run_protocol(const ExperimentSpec& spec, Method method,
                              std::optional<std::size_t> fixed_theta) {
  spec.validate();
  const ResolvedData data = resolve_data(spec);

  RunReport report;
  report.method = method == Method::map ? "map" : "fixed_theta";
  if (method == Method::map) {
    if (spec.prior) {
      report.prior = spec.prior;
    } else {
      auto start = Clock::now();
      report.prior = estimate_prior(data.source, spec.prior_config);
      report.prior_seconds = seconds_since(start);
    }
    report.query_theta = report.prior->rounded_mean();
  } else {
    report.query_theta = *fixed_theta;
  }
  if (report.query_theta < 1) throw Error("experiment: querying width must be >= 1");
  const auto grid_bounds = report.prior
                               ? std::pair{report.prior->grid_lo, report.prior->grid_hi}
                               : spec.prior_config.grid_bounds();

  // Source-direct baseline: trained once on all source rows, no adaptation.
  const TrainedModel source_model =
      train(data.source, spec.net_template.with_hidden(report.query_theta)
                             .with_seed(derive_seed(spec.seed, Stream::repetition, {0x5eedULL})));

  const std::size_t max_budget = spec.budgets.back();
  std::vector<std::vector<RunRow>> per_rep(spec.repetitions);
  // Repetitions run in parallel; the inner sweeps then stay single-threaded.
  const unsigned inner_threads = spec.repetitions > 1 ? 1u : spec.threads;

  parallel_for(
      spec.repetitions,
      [&](std::size_t rep) {
        const std::uint64_t rep_seed = derive_seed(spec.seed, Stream::repetition, {rep});
        auto [query_pool, test_pool] = split(data.target, SplitSpec{0.5, rep_seed});
        const LabeledTable test = reveal_all(test_pool);
        const double source_acc = accuracy(source_model, test);

        ActiveConfig ac;
        ac.initial_size = spec.initial_size;
        ac.budget = max_budget;
        ac.batch_per_query = spec.batch_per_query;
        ac.net_config = spec.net_template.with_hidden(report.query_theta)
                            .with_seed(derive_seed(rep_seed, Stream::active, {0x9e7ULL}));
        ac.seed = rep_seed;

        std::map<std::size_t, double> al_accuracy;  // keyed by labeled rows
        auto start = Clock::now();
        HiddenLabelOracle oracle(query_pool);
        ActiveResult active = run_active_learning(
            query_pool, oracle, ac, [&](std::size_t labeled_rows, const TrainedModel& model) {
              for (std::size_t b : spec.budgets)
                if (labeled_rows == spec.initial_size + b)
                  al_accuracy[labeled_rows] = accuracy(model, test);
            });
        const double active_seconds = seconds_since(start);

        for (std::size_t b : spec.budgets) {
          RunRow row;
          row.budget = b;
          row.repetition = rep;
          row.labeled_size = spec.initial_size + b;
          row.source_accuracy = source_acc;
          if (auto it = al_accuracy.find(row.labeled_size); it != al_accuracy.end()) {
            row.al_accuracy = it->second;
          } else {
            // batched queries can step over a budget; fit that prefix directly
            row.al_accuracy =
                accuracy(train(active.pool.to_table(query_pool, row.labeled_size), ac.net_config),
                         test);
          }
          row.active_seconds = active_seconds;
          if (method == Method::map) {
            auto t0 = Clock::now();
            const LabeledTable labeled = active.pool.to_table(query_pool, row.labeled_size);
            CapacityParams params{labeled.n_features(), labeled.class_count(), spec.alpha,
                                  spec.delta, labeled.rows()};
            AdaptationResult result = run_map_adaptation(
                *report.prior, labeled, params,
                spec.net_template.with_seed(derive_seed(rep_seed, Stream::adapt, {b})),
                grid_bounds, AdaptOptions{inner_threads, {}});
            row.accuracy = evaluate(result, test);
            row.theta = result.theta_star;
            row.adapt_seconds = seconds_since(t0);
          } else {
            row.accuracy = row.al_accuracy;
            row.theta = report.query_theta;
          }
          per_rep[rep].push_back(row);
        }
      },
      spec.threads);

  for (auto& rows : per_rep)
    for (auto& r : rows) report.rows.push_back(r);
  report.aggregates = aggregate(report.rows);
  return report;
}

}  // namespace detail

/// Full method: source prior, active learning at the prior-mean width, MAP
/// width selection per budget. Budgets share one query sequence per
/// repetition (smaller budgets use its prefix).
inline RunReport run_experiment(const ExperimentSpec& spec) {
  return detail::run_protocol(spec, detail::Method::map, std::nullopt);
}

/// Same protocol with the width fixed: no prior and no MAP step.
inline RunReport run_baseline_fixed_theta(const ExperimentSpec& spec, std::size_t theta) {
  if (theta < 1) throw Error("baseline: theta must be >= 1");
  return detail::run_protocol(spec, detail::Method::fixed_theta, theta);
}

// ---------------------------------------------------------------- reports

inline nlohmann::json to_json(const RunReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"budget", r.budget},
                    {"repetition", r.repetition},
                    {"accuracy", r.accuracy},
                    {"theta", r.theta},
                    {"al_accuracy", r.al_accuracy},
                    {"source_accuracy", r.source_accuracy},
                    {"labeled_size", r.labeled_size},
                    {"active_seconds", r.active_seconds},
                    {"adapt_seconds", r.adapt_seconds}});
  nlohmann::json aggregates = nlohmann::json::array();
  for (const auto& a : report.aggregates)
    aggregates.push_back({{"budget", a.budget},
                          {"mean_accuracy", a.mean_accuracy},
                          {"std_accuracy", a.std_accuracy},
                          {"mean_source_accuracy", a.mean_source_accuracy},
                          {"mean_al_accuracy", a.mean_al_accuracy}});
  nlohmann::json j = {{"method", report.method},
                      {"query_theta", report.query_theta},
                      {"prior_seconds", report.prior_seconds},
                      {"rows", rows},
                      {"aggregates", aggregates}};
  j["prior"] = report.prior ? to_json(*report.prior) : nlohmann::json(nullptr);
  return j;
}

inline void write_report_json(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write report: " + path);
  out << to_json(report).dump(2) << '\n';
}

/// budget,mean_accuracy,std_accuracy
inline void write_curves_csv(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write curves: " + path);
  out.precision(17);
  out << "budget,mean_accuracy,std_accuracy\n";
  for (const auto& a : report.aggregates)
    out << a.budget << ',' << a.mean_accuracy << ',' << a.std_accuracy << '\n';
}

inline void write_runs_csv(const std::string& path, const RunReport& report) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write runs: " + path);
  out.precision(17);
  out << "budget,repetition,accuracy,theta,al_accuracy,source_accuracy,labeled_size,"
         "active_seconds,adapt_seconds\n";
  for (const auto& r : report.rows)
    out << r.budget << ',' << r.repetition << ',' << r.accuracy << ',' << r.theta << ','
        << r.al_accuracy << ',' << r.source_accuracy << ',' << r.labeled_size << ','
        << r.active_seconds << ',' << r.adapt_seconds << '\n';
}

}  // namespace mapcx
