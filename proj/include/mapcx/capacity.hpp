#pragma once

// VC-style capacity terms for the hidden-width network family. Everything
// that can overflow is carried in the log domain.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>

#include "mapcx/error.hpp"

namespace mapcx {

struct CapacityParams {
  std::size_t n_inputs = 1;    // i
  std::size_t n_outputs = 2;   // o
  double alpha = 1.0;          // scale on the deviation term
  double delta = 0.05;         // confidence parameter
  std::size_t n_examples = 1;  // N, size of the labeled set

  void validate() const {
    if (n_inputs < 1 || n_outputs < 1) throw Error("capacity: inputs and outputs must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw Error("capacity: alpha must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("capacity: delta must lie in (0, 1)");
    if (n_examples < 1) throw Error("capacity: n_examples must be >= 1");
  }
};

struct CapacityReport {
  std::size_t theta = 0;
  std::uint64_t weight_count = 0;
  std::uint64_t vc_dim = 0;
  double log_growth_2N = 0.0;
  double deviation = 0.0;
  double lambda = 0.0;
};

/// Weights and biases of an i-h-o network: (i+1)h + (h+1)o.
constexpr std::uint64_t weight_count(std::uint64_t inputs, std::uint64_t outputs,
                                     std::uint64_t hidden) {
  return (inputs + 1) * hidden + (hidden + 1) * outputs;
}

/// floor(w log2 w), at least 1.
inline std::uint64_t vc_dimension(std::uint64_t w) {
  if (w < 2) throw Error("vc_dimension requires w >= 2");
  const double wd = static_cast<double>(w);
  const auto d = static_cast<std::uint64_t>(std::floor(wd * std::log2(wd)));
  return std::max<std::uint64_t>(d, 1);
}

inline double log_binomial(std::uint64_t n, std::uint64_t k) {
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0);
}

/// ln sum_{i=0}^{min(d,q)} C(q, i), the log of the Sauer bound on the growth
/// function. Returns q ln 2 exactly when d >= q.
inline double log_growth(std::uint64_t q, std::uint64_t d) {
  if (q < 1) throw Error("log_growth requires q >= 1");
  if (d >= q) return static_cast<double>(q) * std::numbers::ln2;
  // Terms rise until i = q/2, so the largest retained term is at min(d, q/2).
  const std::uint64_t peak = std::min(d, q / 2);
  const double top = log_binomial(q, peak);
  double sum = 0.0;
  for (std::uint64_t i = 0; i <= d; ++i) sum += std::exp(log_binomial(q, i) - top);
  return std::min(top + std::log(sum), static_cast<double>(q) * std::numbers::ln2);
}

/// sqrt((8/N) ln(4 m(2N) / delta)) with m bounded through log_growth.
inline double deviation_term(const CapacityParams& params, std::size_t theta) {
  params.validate();
  if (theta < 1) throw Error("theta must be >= 1");
  const std::uint64_t d = vc_dimension(weight_count(params.n_inputs, params.n_outputs, theta));
  const double n = static_cast<double>(params.n_examples);
  const double lg = log_growth(2 * static_cast<std::uint64_t>(params.n_examples), d);
  return std::sqrt((8.0 / n) * (std::log(4.0) + lg - std::log(params.delta)));
}

inline double lambda_of_theta(const CapacityParams& params, std::size_t theta) {
  return params.alpha * deviation_term(params, theta);
}

inline CapacityReport capacity_report(const CapacityParams& params, std::size_t theta) {
  CapacityReport r;
  r.theta = theta;
  r.weight_count = weight_count(params.n_inputs, params.n_outputs, theta);
  r.vc_dim = vc_dimension(r.weight_count);
  r.log_growth_2N = log_growth(2 * static_cast<std::uint64_t>(params.n_examples), r.vc_dim);
  r.deviation = deviation_term(params, theta);
  r.lambda = params.alpha * r.deviation;
  return r;
}

}  // namespace mapcx
