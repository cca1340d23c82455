#pragma once

// Featurized classification tables: CSV ingestion, seeded splits, bootstrap
// samples and a synthetic source/target generator with controllable shift.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mapcx/error.hpp"
#include "mapcx/random.hpp"

namespace mapcx {

using ClassId = std::size_t;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw Error("matrix data size does not match shape");
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const double> values() const noexcept { return data_; }
  std::span<double> values() noexcept { return data_; }

  Matrix select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      if (indices[i] >= rows_) throw Error("row index out of range");
      std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                  out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
    }
    return out;
  }

  void append_row(std::span<const double> values) {
    if (rows_ == 0 && cols_ == 0) cols_ = values.size();
    if (values.size() != cols_) throw Error("appended row has wrong width");
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline void check_features(const Matrix& features) {
  if (features.rows() == 0) throw Error("table must have at least one row");
  if (features.cols() == 0) throw Error("table must have at least one feature");
  for (double v : features.values())
    if (!std::isfinite(v)) throw Error("table contains a non-finite feature value");
}

inline void check_labels(std::span<const ClassId> labels, std::size_t rows,
                         std::size_t class_count) {
  if (class_count < 2) throw Error("class_count must be at least 2");
  if (labels.size() != rows) throw Error("label count does not match row count");
  for (ClassId y : labels)
    if (y >= class_count) throw Error("label out of range for class_count");
}

}  // namespace detail

/// Feature matrix with one class index per row. Immutable once built.
class LabeledTable {
 public:
  LabeledTable(Matrix features, std::vector<ClassId> labels, std::size_t class_count,
               std::vector<std::string> class_names = {},
               std::vector<std::string> feature_names = {})
      : features_(std::move(features)),
        labels_(std::move(labels)),
        class_count_(class_count),
        class_names_(std::move(class_names)),
        feature_names_(std::move(feature_names)) {
    detail::check_features(features_);
    detail::check_labels(labels_, features_.rows(), class_count_);
    if (!class_names_.empty() && class_names_.size() != class_count_)
      throw Error("class_names must have class_count entries");
    if (!feature_names_.empty() && feature_names_.size() != features_.cols())
      throw Error("feature_names must have one entry per column");
  }

  const Matrix& features() const noexcept { return features_; }
  std::span<const ClassId> labels() const noexcept { return labels_; }
  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t rows() const noexcept { return features_.rows(); }
  std::size_t n_features() const noexcept { return features_.cols(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  LabeledTable subset(std::span<const std::size_t> indices) const {
    std::vector<ClassId> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) labels.push_back(labels_.at(i));
    return {features_.select_rows(indices), std::move(labels), class_count_, class_names_,
            feature_names_};
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(class_count_, 0);
    for (ClassId y : labels_) ++counts[y];
    return counts;
  }

 private:
  Matrix features_;
  std::vector<ClassId> labels_;
  std::size_t class_count_;
  std::vector<std::string> class_names_;
  std::vector<std::string> feature_names_;
};

class HiddenLabelOracle;

/// Feature matrix whose labels, when known, stay hidden behind an oracle.
class UnlabeledTable {
 public:
  UnlabeledTable(Matrix features, std::size_t class_count,
                 std::optional<std::vector<ClassId>> hidden_labels = std::nullopt,
                 std::vector<std::string> class_names = {},
                 std::vector<std::string> feature_names = {})
      : features_(std::move(features)),
        class_count_(class_count),
        hidden_labels_(std::move(hidden_labels)),
        class_names_(std::move(class_names)),
        feature_names_(std::move(feature_names)) {
    detail::check_features(features_);
    if (class_count_ < 2) throw Error("class_count must be at least 2");
    if (hidden_labels_) detail::check_labels(*hidden_labels_, features_.rows(), class_count_);
  }

  const Matrix& features() const noexcept { return features_; }
  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t rows() const noexcept { return features_.rows(); }
  std::size_t n_features() const noexcept { return features_.cols(); }
  bool has_hidden_labels() const noexcept { return hidden_labels_.has_value(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }

  UnlabeledTable subset(std::span<const std::size_t> indices) const {
    std::optional<std::vector<ClassId>> hidden;
    if (hidden_labels_) {
      hidden.emplace();
      hidden->reserve(indices.size());
      for (std::size_t i : indices) hidden->push_back(hidden_labels_->at(i));
    }
    return {features_.select_rows(indices), class_count_, std::move(hidden), class_names_,
            feature_names_};
  }

 private:
  friend class HiddenLabelOracle;

  Matrix features_;
  std::size_t class_count_;
  std::optional<std::vector<ClassId>> hidden_labels_;
  std::vector<std::string> class_names_;
  std::vector<std::string> feature_names_;
};

/// Moves a table's labels behind the oracle boundary.
inline UnlabeledTable hide_labels(const LabeledTable& table) {
  return {table.features(),
          table.class_count(),
          std::vector<ClassId>(table.labels().begin(), table.labels().end()),
          table.class_names(),
          table.feature_names()};
}

struct SplitSpec {
  double fraction = 0.5;
  std::uint64_t seed = 0;
};

struct ShiftSpec {
  std::size_t n_features = 2;
  std::size_t class_count = 2;
  std::size_t source_size = 1000;
  std::size_t target_size = 1000;
  double marginal_shift = 0.0;
  double posterior_shift = 0.0;
  double noise = 1.0;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------- CSV

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline double parse_number(std::string_view cell, std::size_t line_no) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value))
    throw Error("non-numeric feature cell '" + std::string(cell) + "' on line " +
                std::to_string(line_no));
  return value;
}

inline std::string zero_padded_class_name(std::size_t index, std::size_t class_count) {
  std::string digits = std::to_string(index);
  std::size_t width = std::to_string(class_count - 1).size();
  return "c" + std::string(width - digits.size(), '0') + digits;
}

}  // namespace detail

/// Reads a headered, comma-separated table. Labels are re-indexed by the
/// lexicographic order of their raw strings.
inline LabeledTable load_csv(const std::string& path, const std::string& label_column = "label") {
  std::ifstream in(path);
  if (!in) throw Error("cannot open CSV file: " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error("CSV file has no header: " + path);
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  std::vector<std::string> header;
  for (auto cell : detail::split_commas(line)) header.emplace_back(cell);
  auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) throw Error("label column '" + label_column + "' not found");
  const auto label_pos = static_cast<std::size_t>(label_it - header.begin());
  if (header.size() < 2) throw Error("CSV needs at least one feature column");

  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != label_pos) feature_names.push_back(header[c]);

  std::vector<double> values;
  std::vector<std::string> raw_labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_commas(line);
    if (cells.size() != header.size())
      throw Error("ragged row on line " + std::to_string(line_no) + ": expected " +
                  std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_pos) {
        if (cells[c].empty()) throw Error("missing label on line " + std::to_string(line_no));
        raw_labels.emplace_back(cells[c]);
      } else {
        values.push_back(detail::parse_number(cells[c], line_no));
      }
    }
  }
  if (raw_labels.empty()) throw Error("CSV file has no data rows: " + path);

  std::vector<std::string> names(raw_labels);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  if (names.size() < 2) throw Error("degenerate classes: fewer than 2 distinct labels");

  std::map<std::string, ClassId> code;
  for (std::size_t i = 0; i < names.size(); ++i) code.emplace(names[i], i);
  std::vector<ClassId> labels;
  labels.reserve(raw_labels.size());
  for (const auto& s : raw_labels) labels.push_back(code.at(s));

  const std::size_t rows = raw_labels.size();
  const std::size_t cols = feature_names.size();
  std::size_t n_classes = names.size();
  return {Matrix(rows, cols, std::move(values)), std::move(labels), n_classes, std::move(names),
          std::move(feature_names)};
}

/// Writes features and labels with a header row. Class names are written
/// when the table carries them, otherwise zero-padded "cNN" names that keep
/// the lexicographic re-encoding of load_csv stable.
inline void write_csv(const std::string& path, const LabeledTable& table,
                      const std::string& label_column = "label") {
  std::ofstream out(path);
  if (!out) throw Error("cannot write CSV file: " + path);
  out.precision(17);
  for (std::size_t c = 0; c < table.n_features(); ++c) {
    out << (table.feature_names().empty() ? "x" + std::to_string(c) : table.feature_names()[c])
        << ',';
  }
  out << label_column << '\n';
  for (std::size_t r = 0; r < table.rows(); ++r) {
    for (double v : table.features().row(r)) out << v << ',';
    ClassId y = table.labels()[r];
    out << (table.class_names().empty() ? detail::zero_padded_class_name(y, table.class_count())
                                        : table.class_names()[y])
        << '\n';
  }
  if (!out) throw Error("failed writing CSV file: " + path);
}

// ---------------------------------------------------------------- sampling

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t rows, const SplitSpec& spec) {
  if (!(spec.fraction > 0.0 && spec.fraction < 1.0))
    throw Error("split fraction must lie in (0, 1)");
  const auto first = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(rows)));
  if (first == 0 || first >= rows)
    throw Error("split fraction " + std::to_string(spec.fraction) + " on " + std::to_string(rows) +
                " rows leaves an empty part");
  auto idx = shuffled_indices(rows, derive_seed(spec.seed, Stream::split));
  std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(first));
  std::vector<std::size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(first), idx.end());
  return {std::move(a), std::move(b)};
}

}  // namespace detail

/// Random disjoint partition; the first part holds round(fraction * rows) rows.
inline std::pair<LabeledTable, LabeledTable> split(const LabeledTable& table, const SplitSpec& spec) {
  auto [a, b] = detail::split_indices(table.rows(), spec);
  return {table.subset(a), table.subset(b)};
}

inline std::pair<UnlabeledTable, UnlabeledTable> split(const UnlabeledTable& table,
                                                       const SplitSpec& spec) {
  auto [a, b] = detail::split_indices(table.rows(), spec);
  return {table.subset(a), table.subset(b)};
}

constexpr std::size_t kMaxResampleAttempts = 100;

/// Row indices of a sample drawn uniformly without replacement in which every
/// class appears. Retries with derived seeds before giving up.
inline std::vector<std::size_t> bootstrap_indices(const LabeledTable& table, double sample_fraction,
                                                  std::uint64_t seed) {
  if (!(sample_fraction > 0.0 && sample_fraction <= 1.0))
    throw Error("sample_fraction must lie in (0, 1]");
  const auto count = static_cast<std::size_t>(
      std::llround(sample_fraction * static_cast<double>(table.rows())));
  if (count == 0) throw Error("bootstrap sample would be empty");
  for (std::size_t attempt = 0; attempt < kMaxResampleAttempts; ++attempt) {
    auto idx = detail::shuffled_indices(table.rows(), derive_seed(seed, Stream::bootstrap, {attempt}));
    idx.resize(count);
    std::vector<bool> seen(table.class_count(), false);
    std::size_t distinct = 0;
    for (std::size_t i : idx) {
      ClassId y = table.labels()[i];
      if (!seen[y]) {
        seen[y] = true;
        ++distinct;
      }
    }
    if (distinct == table.class_count()) return idx;
  }
  throw Error("bootstrap sample of " + std::to_string(count) + " rows could not realize all " +
              std::to_string(table.class_count()) + " classes after " +
              std::to_string(kMaxResampleAttempts) + " attempts");
}

inline LabeledTable bootstrap_sample(const LabeledTable& table, double sample_fraction,
                                     std::uint64_t seed) {
  return table.subset(bootstrap_indices(table, sample_fraction, seed));
}

// ---------------------------------------------------------------- synthetic

// The informative plane holds kSectorsPerClass * C angular sectors around the
// domain origin, assigned to classes cyclically, with one Gaussian blob per
// sector. Remaining features are standard normal noise.
constexpr std::size_t kSectorsPerClass = 3;
constexpr double kBlobRadius = 3.0;

namespace detail {

inline ClassId sector_label(double x, double y, double rotation, std::size_t sectors,
                            std::size_t class_count) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double angle = std::atan2(y, x) - rotation;
  angle = std::fmod(angle, two_pi);
  if (angle < 0) angle += two_pi;
  auto sector = static_cast<std::size_t>(angle / (two_pi / static_cast<double>(sectors)));
  return (sector % sectors) % class_count;
}

inline std::pair<Matrix, std::vector<ClassId>> draw_domain(const ShiftSpec& spec, std::size_t rows,
                                                           double translation, double rotation,
                                                           std::uint64_t seed) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const std::size_t sectors = kSectorsPerClass * spec.class_count;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, sectors - 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(rows, spec.n_features);
  std::vector<ClassId> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t blob = pick(rng);
    const double a = (static_cast<double>(blob) + 0.5) * two_pi / static_cast<double>(sectors);
    const double u = kBlobRadius * std::cos(a) + spec.noise * gauss(rng);
    const double v = kBlobRadius * std::sin(a) + spec.noise * gauss(rng);
    y[r] = sector_label(u, v, rotation, sectors, spec.class_count);
    x(r, 0) = u + translation;
    x(r, 1) = v + translation;
    for (std::size_t c = 2; c < spec.n_features; ++c) x(r, c) = gauss(rng) + translation;
  }
  return {std::move(x), std::move(y)};
}

inline std::vector<std::string> synthetic_class_names(std::size_t class_count) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < class_count; ++c)
    names.push_back(zero_padded_class_name(c, class_count));
  return names;
}

}  // namespace detail

/// Source and target drawn from the same sector layout. The target's
/// features are translated by marginal_shift along every axis (the labeling
/// rule moves with them), and its labeling rule is rotated so that
/// posterior_shift = 1 leaves a source-trained rule at chance accuracy.
inline std::pair<LabeledTable, UnlabeledTable> make_shifted_pair(const ShiftSpec& spec) {
  if (spec.class_count < 2) throw Error("class_count must be at least 2");
  if (spec.n_features < 2) throw Error("synthetic tables need at least 2 features");
  if (spec.source_size < 10 * spec.class_count || spec.target_size < 10 * spec.class_count)
    throw Error("source and target sizes must be at least 10 * class_count");
  if (!(spec.marginal_shift >= 0.0) || !(spec.noise >= 0.0))
    throw Error("marginal_shift and noise must be nonnegative");
  if (!(spec.posterior_shift >= 0.0 && spec.posterior_shift <= 1.0))
    throw Error("posterior_shift must lie in [0, 1]");

  const std::size_t sectors = kSectorsPerClass * spec.class_count;
  const double sector_width = 2.0 * std::numbers::pi / static_cast<double>(sectors);
  // A rotation of (C-1)/C sector widths keeps exactly 1/C of each sector's label.
  const double rotation = spec.posterior_shift * sector_width *
                          static_cast<double>(spec.class_count - 1) /
                          static_cast<double>(spec.class_count);

  auto [xs, ys] = detail::draw_domain(spec, spec.source_size, 0.0, 0.0,
                                      derive_seed(spec.seed, Stream::synth, {0}));
  auto [xt, yt] = detail::draw_domain(spec, spec.target_size, spec.marginal_shift, rotation,
                                      derive_seed(spec.seed, Stream::synth, {1}));
  auto names = detail::synthetic_class_names(spec.class_count);
  return {LabeledTable(std::move(xs), std::move(ys), spec.class_count, names),
          UnlabeledTable(std::move(xt), spec.class_count, std::move(yt), names)};
}

}  // namespace mapcx
