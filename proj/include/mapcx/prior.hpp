#pragma once

// Source-domain prior over hidden width: sweep the width grid on bootstrap
// samples of the source, keep each sample's validation-optimal width, and
// fit a univariate Gaussian to those optima.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mapcx/dataset.hpp"
#include "mapcx/learner.hpp"
#include "mapcx/parallel.hpp"
#include "mapcx/random.hpp"

namespace mapcx {

inline std::vector<std::size_t> theta_range(std::size_t lo, std::size_t hi) {
  std::vector<std::size_t> grid;
  for (std::size_t t = lo; t <= hi; ++t) grid.push_back(t);
  return grid;
}

struct PriorConfig {
  std::size_t k = 100;
  std::vector<std::size_t> theta_grid = theta_range(2, 50);
  double sample_fraction = 0.8;
  double validation_fraction = 0.3;
  NetConfig net_template{};  // hidden_nodes is replaced per grid point
  std::uint64_t seed = 0;
  unsigned threads = 0;      // 0 = hardware concurrency; never affects results

  void validate() const {
    if (k < 1) throw Error("prior: k must be >= 1");
    if (theta_grid.size() < 2) throw Error("prior: theta_grid needs at least 2 values");
    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
      if (theta_grid[i] < 1) throw Error("prior: theta_grid values must be positive");
      if (i > 0 && theta_grid[i] <= theta_grid[i - 1])
        throw Error("prior: theta_grid must be strictly ascending");
    }
    if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
      throw Error("prior: sample_fraction must lie in (0, 1]");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw Error("prior: validation_fraction must lie in (0, 1)");
  }

  std::pair<std::size_t, std::size_t> grid_bounds() const {
    return {theta_grid.front(), theta_grid.back()};
  }
};

struct ComplexityPrior {
  double mu = 0.0;
  double sigma = 1.0;
  std::vector<std::size_t> optima;
  std::size_t grid_lo = 2;
  std::size_t grid_hi = 50;
  std::string fingerprint;

  /// Gaussian pdf at theta.
  double density(double theta) const {
    const double z = (theta - mu) / sigma;
    return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
  }

  std::size_t rounded_mean() const {
    return static_cast<std::size_t>(std::max(1.0, std::round(mu)));
  }
};

inline constexpr double kSigmaFloor = 1.0;

/// Mean and population standard deviation of the optima; sigma is floored
/// at one complexity unit.
inline ComplexityPrior fit_gaussian(std::vector<std::size_t> optima) {
  if (optima.empty()) throw Error("prior: no optima to fit");
  const double n = static_cast<double>(optima.size());
  double mean = 0.0;
  for (std::size_t t : optima) mean += static_cast<double>(t);
  mean /= n;
  double var = 0.0;
  for (std::size_t t : optima) {
    const double d = static_cast<double>(t) - mean;
    var += d * d;
  }
  var /= n;
  ComplexityPrior p;
  p.mu = mean;
  p.sigma = std::max(std::sqrt(var), kSigmaFloor);
  p.optima = std::move(optima);
  return p;
}

/// Grid value with the smallest error; ties go to the smaller theta.
inline std::size_t select_min_error(const std::vector<std::size_t>& grid,
                                    const std::vector<double>& errors) {
  if (grid.empty() || grid.size() != errors.size())
    throw Error("prior: grid and error lists must be non-empty and equal length");
  std::size_t best = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (errors[i] < errors[best]) best = i;
  return grid[best];
}

namespace detail {

inline std::uint64_t sample_seed(const PriorConfig& config, std::size_t sample_index) {
  return derive_seed(config.seed, Stream::prior, {sample_index});
}

inline std::uint64_t grid_point_seed(std::uint64_t sample_seed, std::size_t theta) {
  return derive_seed(sample_seed, Stream::prior, {0xa11ULL, theta});
}

inline std::pair<LabeledTable, LabeledTable> validation_split(const LabeledTable& sample,
                                                              double validation_fraction,
                                                              std::uint64_t sample_seed) {
  auto [validation, training] =
      split(sample, SplitSpec{validation_fraction, derive_seed(sample_seed, Stream::split)});
  return {std::move(training), std::move(validation)};
}

inline double grid_point_error(const LabeledTable& training, const LabeledTable& validation,
                               const NetConfig& net_template, std::uint64_t sample_seed,
                               std::size_t theta) {
  NetConfig cfg = net_template.with_hidden(theta).with_seed(grid_point_seed(sample_seed, theta));
  return zero_one_error(train(training, cfg), validation);
}

}  // namespace detail

/// Validation error of every grid width on one sample.
inline std::vector<double> sweep_errors(const LabeledTable& sample, const PriorConfig& config,
                                        std::uint64_t sample_seed) {
  config.validate();
  auto [training, validation] =
      detail::validation_split(sample, config.validation_fraction, sample_seed);
  std::vector<double> errors(config.theta_grid.size());
  parallel_for(
      errors.size(),
      [&](std::size_t g) {
        errors[g] = detail::grid_point_error(training, validation, config.net_template,
                                             sample_seed, config.theta_grid[g]);
      },
      config.threads);
  return errors;
}

/// Validation-optimal width for one sample.
inline std::size_t sweep_sample(const LabeledTable& sample, const PriorConfig& config,
                                std::uint64_t sample_seed) {
  return select_min_error(config.theta_grid, sweep_errors(sample, config, sample_seed));
}

inline std::string prior_fingerprint(const LabeledTable& source, const PriorConfig& config) {
  nlohmann::json j = {{"k", config.k},
                      {"theta_grid", config.theta_grid},
                      {"sample_fraction", config.sample_fraction},
                      {"validation_fraction", config.validation_fraction},
                      {"net_template", to_json(config.net_template)},
                      {"seed", config.seed},
                      {"source_rows", source.rows()},
                      {"source_features", source.n_features()},
                      {"source_classes", source.class_count()}};
  // FNV-1a over the canonical dump
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Runs the k x |grid| sweep and fits the Gaussian. Every (sample, theta)
/// task has its own derived seed, so the result does not depend on
/// config.threads.
inline ComplexityPrior estimate_prior(const LabeledTable& source, const PriorConfig& config) {
  config.validate();
  if (config.k < 2) throw Error("prior: k must be >= 2");
  struct SampleSplit {
    LabeledTable training;
    LabeledTable validation;
  };
  std::vector<SampleSplit> samples;
  samples.reserve(config.k);
  for (std::size_t s = 0; s < config.k; ++s) {
    const std::uint64_t seed = detail::sample_seed(config, s);
    auto sample = bootstrap_sample(source, config.sample_fraction, seed);
    auto [training, validation] =
        detail::validation_split(sample, config.validation_fraction, seed);
    samples.push_back({std::move(training), std::move(validation)});
  }

  const std::size_t m = config.theta_grid.size();
  std::vector<double> errors(config.k * m);
  parallel_for(
      errors.size(),
      [&](std::size_t task) {
        const std::size_t s = task / m;
        errors[task] = detail::grid_point_error(samples[s].training, samples[s].validation,
                                                config.net_template, detail::sample_seed(config, s),
                                                config.theta_grid[task % m]);
      },
      config.threads);

  std::vector<std::size_t> optima(config.k);
  for (std::size_t s = 0; s < config.k; ++s) {
    std::vector<double> row(errors.begin() + static_cast<std::ptrdiff_t>(s * m),
                            errors.begin() + static_cast<std::ptrdiff_t>((s + 1) * m));
    optima[s] = select_min_error(config.theta_grid, row);
  }
  ComplexityPrior prior = fit_gaussian(std::move(optima));
  std::tie(prior.grid_lo, prior.grid_hi) = config.grid_bounds();
  prior.fingerprint = prior_fingerprint(source, config);
  return prior;
}

/// Integer search window [floor(mu - sigma), ceil(mu + sigma)] clamped to
/// the grid bounds; never empty.
inline std::pair<std::size_t, std::size_t> search_interval(
    const ComplexityPrior& prior, std::pair<std::size_t, std::size_t> grid_bounds) {
  const auto [lo, hi] = grid_bounds;
  if (lo > hi) throw Error("search_interval: grid bounds are inverted");
  const double l = static_cast<double>(lo);
  const double h = static_cast<double>(hi);
  const double a = std::clamp(std::floor(prior.mu - prior.sigma), l, h);
  const double b = std::clamp(std::ceil(prior.mu + prior.sigma), l, h);
  return {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
}

// ---------------------------------------------------------------- persistence

inline nlohmann::json to_json(const ComplexityPrior& p) {
  return {{"format", "mapcx.prior"},
          {"version", 1},
          {"mu", p.mu},
          {"sigma", p.sigma},
          {"optima", p.optima},
          {"grid_lo", p.grid_lo},
          {"grid_hi", p.grid_hi},
          {"fingerprint", p.fingerprint}};
}

inline ComplexityPrior prior_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "mapcx.prior") throw Error("not a mapcx prior document");
  ComplexityPrior p;
  p.mu = j.at("mu").get<double>();
  p.sigma = j.at("sigma").get<double>();
  p.optima = j.at("optima").get<std::vector<std::size_t>>();
  p.grid_lo = j.at("grid_lo").get<std::size_t>();
  p.grid_hi = j.at("grid_hi").get<std::size_t>();
  p.fingerprint = j.value("fingerprint", "");
  if (!(p.sigma > 0.0) || !std::isfinite(p.mu)) throw Error("prior document has invalid mu/sigma");
  return p;
}

inline void save_prior(const std::string& path, const ComplexityPrior& prior) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write prior file: " + path);
  out << to_json(prior).dump(2) << '\n';
}

inline ComplexityPrior load_prior(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prior file: " + path);
  return prior_from_json(nlohmann::json::parse(in));
}

}  // namespace mapcx
