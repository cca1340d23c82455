#pragma once

// Fixtures and independent oracles shared by the test binaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mapcx/dataset.hpp"

namespace mapcx::testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("mapcx_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

/// Two Gaussian blobs centred at (-gap, 0) and (+gap, 0) in the first two
/// features; extra features are noise.
inline LabeledTable blobs(std::size_t rows, double gap, double spread, std::uint64_t seed,
                          std::size_t n_features = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(rows, n_features);
  std::vector<ClassId> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = r % 2;
    x(r, 0) = (y[r] == 0 ? -gap : gap) + spread * g(rng);
    for (std::size_t c = 1; c < n_features; ++c) x(r, c) = spread * g(rng);
  }
  return {std::move(x), std::move(y), 2};
}

/// Table whose first feature is a unique row id, for row-identity audits.
inline LabeledTable id_table(std::size_t rows, std::size_t class_count = 2) {
  Matrix x(rows, 2);
  std::vector<ClassId> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    x(r, 0) = static_cast<double>(r);
    x(r, 1) = static_cast<double>(r % 7);
    y[r] = r % class_count;
  }
  return {std::move(x), std::move(y), class_count};
}

inline std::vector<long> ids(const LabeledTable& t) {
  std::vector<long> out;
  for (std::size_t r = 0; r < t.rows(); ++r) out.push_back(std::lround(t.features()(r, 0)));
  return out;
}

/// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

/// Asymptotic critical value of the two-sample KS test at alpha = 0.05.
inline double ks_critical_05(std::size_t n, std::size_t m) {
  return 1.358 * std::sqrt(static_cast<double>(n + m) / static_cast<double>(n * m));
}

inline std::vector<double> column(const Matrix& x, std::size_t c) {
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = x(r, c);
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace mapcx::testing

namespace mapcx::testing {

/// Every row of `t` twice, once per label of a two-class problem, so no
/// model can fit it and gradients never vanish.
inline LabeledTable contradictory(const LabeledTable& t) {
  Matrix x(0, 0);
  std::vector<ClassId> y;
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (ClassId c : {ClassId{0}, ClassId{1}}) {
      x.append_row(t.features().row(r));
      y.push_back(c);
    }
  return {std::move(x), std::move(y), 2};
}

/// ln sum_{i<=d} C(q, i) from exact integer binomials (Pascal's triangle in
/// 128-bit integers; exact for q <= 120).
inline long double exact_log_growth(unsigned q, unsigned d) {
  std::vector<unsigned __int128> row{1};
  for (unsigned n = 1; n <= q; ++n) {
    std::vector<unsigned __int128> next(n + 1, 1);
    for (unsigned i = 1; i < n; ++i) next[i] = row[i - 1] + row[i];
    row = std::move(next);
  }
  unsigned __int128 sum = 0;
  for (unsigned i = 0; i <= std::min(d, q); ++i) sum += row[i];
  return std::log(static_cast<long double>(sum));
}

/// Independent recomputation of the capacity rate from raw inputs: own
/// weight count, own base-2 w log w, exact integer growth sum.
inline long double reference_lambda(unsigned inputs, unsigned outputs, unsigned hidden,
                                    unsigned n_examples, long double alpha, long double delta) {
  const unsigned long long w = 1ULL * (inputs + 1) * hidden + 1ULL * (hidden + 1) * outputs;
  const auto d = static_cast<unsigned long long>(
      std::floor(static_cast<long double>(w) * std::log2(static_cast<long double>(w))));
  const unsigned q = 2 * n_examples;
  const long double lg = d >= q ? q * std::log(2.0L)
                                : exact_log_growth(q, static_cast<unsigned>(d));
  return alpha * std::sqrt((8.0L / n_examples) * std::log(4.0L * std::exp(lg) / delta));
}

}  // namespace mapcx::testing
