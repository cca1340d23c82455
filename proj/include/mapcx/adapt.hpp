#pragma once

// MAP selection of hidden width on the labeled target set: in-sample error,
// complexity-dependent exponential likelihood, Gaussian source prior.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mapcx/capacity.hpp"
#include "mapcx/dataset.hpp"
#include "mapcx/learner.hpp"
#include "mapcx/parallel.hpp"
#include "mapcx/prior.hpp"

namespace mapcx {

/// lambda * exp(-lambda * error): exponential density in the empirical error.
inline double likelihood(double empirical_error, double lambda) {
  if (!std::isfinite(empirical_error) || !std::isfinite(lambda))
    throw Error("likelihood: inputs must be finite");
  if (!(lambda > 0.0)) throw Error("likelihood: lambda must be positive");
  if (empirical_error < 0.0 || empirical_error > 1.0)
    throw Error("likelihood: empirical error must lie in [0, 1]");
  return lambda * std::exp(-lambda * empirical_error);
}

struct PosteriorRow {
  std::size_t theta = 0;
  double empirical_error = std::numeric_limits<double>::quiet_NaN();
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double likelihood = std::numeric_limits<double>::quiet_NaN();
  double prior_density = std::numeric_limits<double>::quiet_NaN();
  double unnormalized_posterior = std::numeric_limits<double>::quiet_NaN();
  CapacityReport capacity{};
  bool failed = false;
};

/// Fills one posterior row from its measured error.
inline PosteriorRow posterior_row(std::size_t theta, double empirical_error,
                                  const CapacityParams& params, double prior_density) {
  PosteriorRow row;
  row.theta = theta;
  row.capacity = capacity_report(params, theta);
  row.empirical_error = empirical_error;
  row.lambda = row.capacity.lambda;
  row.likelihood = likelihood(empirical_error, row.lambda);
  row.prior_density = prior_density;
  row.unnormalized_posterior = row.likelihood * prior_density;
  return row;
}

inline PosteriorRow failed_row(std::size_t theta) {
  PosteriorRow row;
  row.theta = theta;
  row.failed = true;
  return row;
}

/// Theta of the largest unnormalized posterior among non-failed rows; the
/// first (smallest theta, for ascending tables) wins ties.
inline std::size_t select_theta_star(const std::vector<PosteriorRow>& table) {
  const PosteriorRow* best = nullptr;
  for (const auto& row : table) {
    if (row.failed) continue;
    if (!best || row.unnormalized_posterior > best->unnormalized_posterior ||
        (row.unnormalized_posterior == best->unnormalized_posterior && row.theta < best->theta))
      best = &row;
  }
  if (!best) throw Error("adapt: every theta in the search interval failed to train");
  return best->theta;
}

struct AdaptationResult {
  std::vector<PosteriorRow> table;
  std::size_t theta_star = 0;
  TrainedModel final_model;
  std::size_t labeled_pool_size = 0;
  std::pair<std::size_t, std::size_t> interval{};
  std::string prior_fingerprint;
};

struct AdaptOptions {
  unsigned threads = 0;
  /// Replaces the prior's Gaussian density when set.
  std::function<double(std::size_t)> prior_density_override{};
};

inline std::uint64_t adapt_seed(const NetConfig& net_template, std::size_t theta) {
  return derive_seed(net_template.seed, Stream::adapt, {theta});
}

/// Trains one width per theta in the prior's search interval on `labeled`,
/// scores each by likelihood x prior density and returns the argmax. The
/// model trained for theta* is the final model; training is deterministic,
/// so retraining it would reproduce the same weights.
inline AdaptationResult run_map_adaptation(const ComplexityPrior& prior,
                                           const LabeledTable& labeled,
                                           const CapacityParams& params,
                                           const NetConfig& net_template,
                                           std::pair<std::size_t, std::size_t> grid_bounds,
                                           const AdaptOptions& options = {}) {
  params.validate();
  if (params.n_examples != labeled.rows())
    throw Error("adapt: capacity n_examples (" + std::to_string(params.n_examples) +
                ") must equal the labeled set size (" + std::to_string(labeled.rows()) + ")");
  {
    auto counts = labeled.class_counts();
    std::size_t present = 0;
    for (auto c : counts) present += c > 0;
    if (present < 2) throw Error("adapt: labeled set must contain at least two classes");
  }

  const auto interval = search_interval(prior, grid_bounds);
  const std::size_t width = interval.second - interval.first + 1;
  std::vector<PosteriorRow> table(width);
  std::vector<std::optional<TrainedModel>> models(width);

  parallel_for(
      width,
      [&](std::size_t i) {
        const std::size_t theta = interval.first + i;
        try {
          NetConfig cfg = net_template.with_hidden(theta).with_seed(adapt_seed(net_template, theta));
          TrainedModel model = train(labeled, cfg);
          const double density = options.prior_density_override
                                     ? options.prior_density_override(theta)
                                     : prior.density(static_cast<double>(theta));
          table[i] = posterior_row(theta, zero_one_error(model, labeled), params, density);
          models[i].emplace(std::move(model));
        } catch (const TrainingDiverged&) {
          table[i] = failed_row(theta);
        }
      },
      options.threads);

  const std::size_t theta_star = select_theta_star(table);
  return {std::move(table), theta_star, std::move(*models[theta_star - interval.first]),
          labeled.rows(), interval, prior.fingerprint};
}

inline double evaluate(const AdaptationResult& result, const LabeledTable& test) {
  return accuracy(result.final_model, test);
}

// ---------------------------------------------------------------- exports

inline void write_posterior_csv(const std::string& path, const std::vector<PosteriorRow>& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write posterior table: " + path);
  out.precision(17);
  out << "theta,weight_count,vc_dim,log_growth_2N,deviation,empirical_error,lambda,likelihood,"
         "prior_density,unnormalized_posterior,failed\n";
  for (const auto& r : table) {
    out << r.theta << ',';
    if (r.failed) {
      out << ",,,,,,,,," << 1 << '\n';
      continue;
    }
    out << r.capacity.weight_count << ',' << r.capacity.vc_dim << ',' << r.capacity.log_growth_2N
        << ',' << r.capacity.deviation << ',' << r.empirical_error << ',' << r.lambda << ','
        << r.likelihood << ',' << r.prior_density << ',' << r.unnormalized_posterior << ',' << 0
        << '\n';
  }
}

inline nlohmann::json summary_json(const AdaptationResult& result, const CapacityParams& params) {
  std::size_t failed = 0;
  for (const auto& r : result.table) failed += r.failed;
  return {{"theta_star", result.theta_star},
          {"labeled_pool_size", result.labeled_pool_size},
          {"theta_min", result.interval.first},
          {"theta_max", result.interval.second},
          {"failed_rows", failed},
          {"alpha", params.alpha},
          {"delta", params.delta},
          {"prior_fingerprint", result.prior_fingerprint}};
}

}  // namespace mapcx
