#pragma once

// Pool-based active learning with margin sampling.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mapcx/dataset.hpp"
#include "mapcx/learner.hpp"
#include "mapcx/random.hpp"

namespace mapcx {

/// Answers label queries by pool row index.
class LabelOracle {
 public:
  virtual ~LabelOracle() = default;
  virtual ClassId query(std::size_t row) = 0;
  virtual std::size_t query_count() const = 0;
};

/// Oracle backed by the hidden labels of an UnlabeledTable.
class HiddenLabelOracle final : public LabelOracle {
 public:
  explicit HiddenLabelOracle(const UnlabeledTable& table) {
    if (!table.hidden_labels_) throw Error("oracle: table has no hidden labels");
    labels_ = *table.hidden_labels_;
  }

  ClassId query(std::size_t row) override {
    if (row >= labels_.size())
      throw Error("oracle: row " + std::to_string(row) + " out of range (" +
                  std::to_string(labels_.size()) + " rows)");
    ++count_;
    return labels_[row];
  }

  std::size_t query_count() const override { return count_; }

 private:
  std::vector<ClassId> labels_;
  std::size_t count_ = 0;
};

/// Oracle delegating to a callback, e.g. a human labeler front end.
class CallbackOracle final : public LabelOracle {
 public:
  explicit CallbackOracle(std::function<ClassId(std::size_t)> answer) : answer_(std::move(answer)) {}

  ClassId query(std::size_t row) override {
    ClassId y = answer_(row);
    ++count_;
    return y;
  }
  std::size_t query_count() const override { return count_; }

 private:
  std::function<ClassId(std::size_t)> answer_;
  std::size_t count_ = 0;
};

inline HiddenLabelOracle make_hidden_label_oracle(const UnlabeledTable& target) {
  return HiddenLabelOracle(target);
}

/// Queries every row of `table` through a fresh oracle. Used for held-out
/// evaluation pools, never for the pool being actively sampled.
inline LabeledTable reveal_all(const UnlabeledTable& table) {
  HiddenLabelOracle oracle(table);
  std::vector<ClassId> labels(table.rows());
  for (std::size_t r = 0; r < table.rows(); ++r) labels[r] = oracle.query(r);
  return {table.features(), std::move(labels), table.class_count(), table.class_names(),
          table.feature_names()};
}

struct ActiveConfig {
  std::size_t initial_size = 10;   // r
  std::size_t budget = 100;        // b
  std::size_t batch_per_query = 1;
  NetConfig net_config{};          // hidden_nodes is the querying width
  std::uint64_t seed = 0;
};

struct PoolEntry {
  std::size_t row = 0;
  ClassId label = 0;
  std::size_t iteration = 0;  // 0 for the initial draw
  double margin = std::numeric_limits<double>::quiet_NaN();
};

/// Labeled target rows in the order they were acquired.
struct LabeledPool {
  std::vector<PoolEntry> entries;
  std::size_t initial_size = 0;

  std::size_t size() const noexcept { return entries.size(); }
  std::size_t queried() const noexcept { return entries.size() - initial_size; }

  /// The first `count` acquired rows as a LabeledTable (all rows by default).
  LabeledTable to_table(const UnlabeledTable& pool,
                        std::size_t count = std::numeric_limits<std::size_t>::max()) const {
    count = std::min(count, entries.size());
    std::vector<std::size_t> rows(count);
    std::vector<ClassId> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
      rows[i] = entries[i].row;
      labels[i] = entries[i].label;
    }
    return {pool.features().select_rows(rows), std::move(labels), pool.class_count(),
            pool.class_names(), pool.feature_names()};
  }
};

struct ActiveResult {
  LabeledPool pool;
  TrainedModel model;
};

/// Called after each model the loop trains, with the number of labeled rows
/// that model saw.
using ActiveObserver = std::function<void(std::size_t labeled_rows, const TrainedModel&)>;

/// Draws r random rows (redrawing until at least two classes appear), then
/// repeatedly trains on the labeled rows and queries the remaining row with
/// the smallest top-two probability gap, lowest row index on ties. Stops
/// after exactly `budget` queries and returns the model trained on the full
/// labeled pool.
inline ActiveResult run_active_learning(const UnlabeledTable& pool, LabelOracle& oracle,
                                        const ActiveConfig& config,
                                        const ActiveObserver& observer = {}) {
  config.net_config.validate();
  if (config.initial_size < 2) throw Error("active: initial_size must be at least 2");
  if (config.batch_per_query < 1) throw Error("active: batch_per_query must be at least 1");
  if (pool.rows() < config.initial_size + config.budget)
    throw Error("active: budget " + std::to_string(config.budget) + " plus initial size " +
                std::to_string(config.initial_size) + " exceeds pool of " +
                std::to_string(pool.rows()) + " rows");

  // Labels revealed during failed initial draws are cached, never re-queried.
  std::vector<std::optional<ClassId>> known(pool.rows());
  auto ask = [&](std::size_t row) {
    if (!known[row]) {
      ClassId y = oracle.query(row);
      if (y >= pool.class_count())
        throw Error("oracle returned label " + std::to_string(y) + " outside class range");
      known[row] = y;
    }
    return *known[row];
  };

  LabeledPool labeled;
  labeled.initial_size = config.initial_size;
  bool realized = false;
  for (std::size_t attempt = 0; attempt < kMaxResampleAttempts && !realized; ++attempt) {
    auto idx = detail::shuffled_indices(pool.rows(), derive_seed(config.seed, Stream::active, {attempt}));
    idx.resize(config.initial_size);
    labeled.entries.clear();
    std::vector<bool> seen(pool.class_count(), false);
    std::size_t distinct = 0;
    for (std::size_t row : idx) {
      ClassId y = ask(row);
      if (!seen[y]) {
        seen[y] = true;
        ++distinct;
      }
      labeled.entries.push_back({row, y, 0, std::numeric_limits<double>::quiet_NaN()});
    }
    realized = distinct >= 2;
  }
  if (!realized) throw Error("active: initial draw could not realize two classes");

  std::vector<bool> taken(pool.rows(), false);
  for (const auto& e : labeled.entries) taken[e.row] = true;

  auto fit = [&] {
    TrainedModel model = train(labeled.to_table(pool), config.net_config);
    if (observer) observer(labeled.size(), model);
    return model;
  };

  std::size_t iteration = 0;
  while (labeled.queried() < config.budget) {
    ++iteration;
    TrainedModel model = fit();

    std::vector<std::size_t> remaining;
    remaining.reserve(pool.rows() - labeled.size());
    for (std::size_t r = 0; r < pool.rows(); ++r)
      if (!taken[r]) remaining.push_back(r);
    const std::vector<double> m = margin(model, pool.features().select_rows(remaining));

    std::vector<std::size_t> order(remaining.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t picks = std::min(config.batch_per_query, config.budget - labeled.queried());
    // remaining is ascending, so position order is row order for ties
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(picks), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        return m[a] < m[b] || (m[a] == m[b] && a < b);
                      });
    for (std::size_t p = 0; p < picks; ++p) {
      const std::size_t row = remaining[order[p]];
      labeled.entries.push_back({row, ask(row), iteration, m[order[p]]});
      taken[row] = true;
    }
  }
  TrainedModel final_model = fit();
  return {std::move(labeled), std::move(final_model)};
}

/// Query log as CSV: iteration,row,margin,label (initial rows have an empty margin).
inline void write_query_log(const std::string& path, const LabeledPool& pool) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write query log: " + path);
  out.precision(17);
  out << "iteration,row,margin,label\n";
  for (const auto& e : pool.entries) {
    out << e.iteration << ',' << e.row << ',';
    if (!std::isnan(e.margin)) out << e.margin;
    out << ',' << e.label << '\n';
  }
}

}  // namespace mapcx
