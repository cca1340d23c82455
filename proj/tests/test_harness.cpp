#include <gtest/gtest.h>

#include <fstream>

#include "mapcx/harness.hpp"
#include "test_support.hpp"

using namespace mapcx;
using namespace mapcx::testing;

namespace {

ExperimentSpec small_spec(std::uint64_t seed) {
  ExperimentSpec spec;
  spec.synthetic = ShiftSpec{2, 2, 100, 120, 0.5, 0.2, 0.8, seed};
  spec.prior_config.k = 3;
  spec.prior_config.theta_grid = {2, 3, 4};
  spec.prior_config.net_template.epochs = 30;
  spec.prior_config.seed = seed;
  spec.net_template.epochs = 30;
  spec.initial_size = 6;
  spec.budgets = {0, 4, 10};
  spec.repetitions = 3;
  spec.seed = seed;
  return spec;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST(MeanAndStd, SampleStandardDeviation) {
  auto [m, s] = mean_and_std({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(m, 2.5);
  EXPECT_NEAR(s, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(mean_and_std({0.7}).second, 0.0);
}

TEST(Experiment, ZeroBudgetUsesOnlyTheInitialRows) {
  ExperimentSpec spec = small_spec(1);
  spec.budgets = {0};
  RunReport report = run_experiment(spec);
  ASSERT_EQ(report.rows.size(), spec.repetitions);
  for (const auto& r : report.rows) {
    EXPECT_EQ(r.labeled_size, spec.initial_size);
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 1.0);
  }
}

TEST(Experiment, AggregatesRecomputeFromRows) {
  RunReport report = run_experiment(small_spec(2));
  ASSERT_EQ(report.aggregates.size(), 3u);
  for (const auto& a : report.aggregates) {
    std::vector<double> acc;
    for (const auto& r : report.rows)
      if (r.budget == a.budget) acc.push_back(r.accuracy);
    ASSERT_EQ(acc.size(), 3u);
    auto [m, s] = mean_and_std(acc);
    EXPECT_EQ(a.mean_accuracy, m);
    EXPECT_EQ(a.std_accuracy, s);
  }
  for (const auto& r : report.rows) {
    auto interval = search_interval(*report.prior, {2, 4});
    EXPECT_GE(r.theta, interval.first);
    EXPECT_LE(r.theta, interval.second);
  }
}

TEST(Experiment, DeterministicAcrossThreadCounts) {
  ExperimentSpec spec = small_spec(3);
  spec.threads = 1;
  RunReport a = run_experiment(spec);
  spec.threads = 3;
  RunReport b = run_experiment(spec);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    EXPECT_EQ(a.rows[i].accuracy, b.rows[i].accuracy);
    EXPECT_EQ(a.rows[i].theta, b.rows[i].theta);
    EXPECT_EQ(a.rows[i].al_accuracy, b.rows[i].al_accuracy);
  }
}

TEST(Experiment, FixedThetaAtPriorMeanReplaysTheQueryModel) {
  ExperimentSpec spec = small_spec(4);
  RunReport map = run_experiment(spec);
  spec.prior = map.prior;
  RunReport fixed = run_baseline_fixed_theta(spec, map.query_theta);
  EXPECT_EQ(fixed.method, "fixed_theta");
  EXPECT_FALSE(fixed.prior.has_value());
  ASSERT_EQ(map.rows.size(), fixed.rows.size());
  for (std::size_t i = 0; i < map.rows.size(); ++i) {
    EXPECT_EQ(fixed.rows[i].al_accuracy, map.rows[i].al_accuracy);
    EXPECT_EQ(fixed.rows[i].accuracy, fixed.rows[i].al_accuracy);
    EXPECT_EQ(fixed.rows[i].source_accuracy, map.rows[i].source_accuracy);
    EXPECT_EQ(fixed.rows[i].theta, map.query_theta);
  }
}

TEST(Experiment, ReusedPriorSkipsEstimation) {
  ExperimentSpec spec = small_spec(5);
  spec.prior = fit_gaussian({3, 3, 4});
  spec.prior->grid_lo = 2;
  spec.prior->grid_hi = 4;
  spec.repetitions = 1;
  spec.budgets = {2};
  const auto before = models_trained();
  RunReport report = run_experiment(spec);
  EXPECT_EQ(report.prior_seconds, 0.0);
  EXPECT_EQ(report.query_theta, 3u);
  // source model, b + 1 query-loop fits, one per interval width
  const auto interval = search_interval(*spec.prior, {2, 4});
  EXPECT_EQ(models_trained() - before, 1 + 3 + (interval.second - interval.first + 1));
}

TEST(Experiment, BatchedQueriesStillReportEveryBudget) {
  ExperimentSpec spec = small_spec(6);
  spec.batch_per_query = 3;
  spec.budgets = {4, 9};
  spec.repetitions = 1;
  RunReport report = run_experiment(spec);
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[0].labeled_size, 10u);
  EXPECT_EQ(report.rows[1].labeled_size, 15u);
}

TEST(Experiment, RejectsBadSpecs) {
  ExperimentSpec spec = small_spec(7);
  spec.budgets = {10, 4};
  EXPECT_THROW(run_experiment(spec), Error);
  spec = small_spec(7);
  spec.repetitions = 0;
  EXPECT_THROW(run_experiment(spec), Error);
  spec = small_spec(7);
  spec.synthetic.reset();
  EXPECT_THROW(run_experiment(spec), Error);
  spec = small_spec(7);
  spec.budgets = {500};
  EXPECT_THROW(run_experiment(spec), Error);
  EXPECT_THROW(run_baseline_fixed_theta(small_spec(7), 0), Error);
}

TEST(Experiment, CsvInputsMustAgree) {
  auto dir = temp_dir("harness_csv");
  write_text(dir / "s.csv", "x,y,label\n1,2,a\n3,4,b\n");
  write_text(dir / "t.csv", "x,label\n1,a\n3,b\n");
  ExperimentSpec spec;
  spec.source_path = (dir / "s.csv").string();
  spec.target_path = (dir / "t.csv").string();
  EXPECT_THROW(resolve_data(spec), Error);
}

TEST(Reports, WritersProduceOneLinePerRecord) {
  RunReport report = run_experiment(small_spec(8));
  auto dir = temp_dir("reports");
  write_report_json((dir / "r.json").string(), report);
  write_curves_csv((dir / "c.csv").string(), report);
  write_runs_csv((dir / "u.csv").string(), report);
  EXPECT_EQ(count_lines(dir / "c.csv"), 1 + report.aggregates.size());
  EXPECT_EQ(count_lines(dir / "u.csv"), 1 + report.rows.size());
  std::ifstream in(dir / "r.json");
  auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j["method"], "map");
  EXPECT_EQ(j["rows"].size(), report.rows.size());
  EXPECT_EQ(j["query_theta"].get<std::size_t>(), report.query_theta);
  EXPECT_DOUBLE_EQ(j["prior"]["mu"].get<double>(), report.prior->mu);
}
