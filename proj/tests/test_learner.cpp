#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mapcx/learner.hpp"
#include "test_support.hpp"

using namespace mapcx;
using namespace mapcx::testing;

namespace {

LabeledTable gradient_fixture() {
  Matrix x(5, 3, {0.3, -1.2, 0.8,   //
                  1.1, 0.4, -0.5,   //
                  -0.7, 0.9, 0.2,   //
                  0.05, -0.3, -1.4,  //
                  -1.6, 1.3, 0.6});
  return {std::move(x), {0, 1, 1, 0, 1}, 2};
}

// Largest relative difference between the analytic gradient and central
// finite differences of the mean loss.
double max_gradient_error(const NetWeights& w, const Matrix& x, std::span<const ClassId> y) {
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  NetWeights analytic;
  loss_and_gradient(w, x, y, rows, &analytic);
  const double h = 1e-6;
  double worst = 0.0;
  auto probe = [&](std::vector<double> NetWeights::*field, const std::vector<double>& grads) {
    for (std::size_t i = 0; i < grads.size(); ++i) {
      NetWeights plus = w, minus = w;
      (plus.*field)[i] += h;
      (minus.*field)[i] -= h;
      const double numeric = (loss_and_gradient(plus, x, y, rows, nullptr) -
                              loss_and_gradient(minus, x, y, rows, nullptr)) /
                             (2 * h);
      const double scale = std::max({std::abs(numeric), std::abs(grads[i]), 1e-8});
      worst = std::max(worst, std::abs(numeric - grads[i]) / scale);
    }
  };
  probe(&NetWeights::input_hidden, analytic.input_hidden);
  probe(&NetWeights::hidden_output, analytic.hidden_output);
  return worst;
}

}  // namespace

TEST(Learner, AnalyticGradientMatchesFiniteDifferences) {
  LabeledTable t = gradient_fixture();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    NetWeights w = initialize_weights(3, 4, 2, seed);
    for (double& b : w.hidden_output) b += 0.1;  // non-zero biases too
    EXPECT_LE(max_gradient_error(w, t.features(), t.labels()), 1e-4);
  }
}

TEST(Learner, AnalyticGradientMatchesForThreeClasses) {
  Matrix x(4, 2, {0.1, 0.2, -0.4, 1.0, 0.9, -0.3, -1.1, -0.8});
  std::vector<ClassId> y{0, 1, 2, 1};
  NetWeights w = initialize_weights(2, 3, 3, 42);
  EXPECT_LE(max_gradient_error(w, x, y), 1e-4);
}

TEST(Learner, SeparableBlobsReachZeroTrainingError) {
  auto data = blobs(200, 3.0, 0.5, 1);
  NetConfig cfg;
  cfg.hidden_nodes = 2;
  cfg.seed = 5;
  TrainedModel model = train(data, cfg);
  EXPECT_EQ(zero_one_error(model, data), 0.0);
}

TEST(Learner, TrainingIsBitReproducible) {
  auto data = blobs(120, 1.0, 1.0, 2);
  NetConfig cfg;
  cfg.hidden_nodes = 5;
  cfg.epochs = 30;
  cfg.seed = 77;
  TrainedModel a = train(data, cfg);
  TrainedModel b = train(data, cfg);
  EXPECT_EQ(a.weights(), b.weights());
  EXPECT_NE(a.weights(), train(data, cfg.with_seed(78)).weights());
}

TEST(Learner, TrainsWideLogisticNetworkOnTwentyFeatures) {
  auto data = blobs(300, 1.5, 1.0, 3, 20);
  NetConfig cfg;
  cfg.hidden_nodes = 25;
  cfg.seed = 1;
  TrainedModel model = train(data, cfg);
  EXPECT_EQ(model.weights().input_hidden.size(), 21u * 25u);
  EXPECT_EQ(model.weights().hidden_output.size(), 26u * 2u);
  EXPECT_LT(zero_one_error(model, data), 0.1);
}

TEST(Learner, CountsTrainedModels) {
  auto data = blobs(20, 2.0, 0.5, 4);
  NetConfig cfg;
  cfg.epochs = 1;
  const auto before = models_trained();
  train(data, cfg);
  train(data, cfg);
  EXPECT_EQ(models_trained() - before, 2u);
}

TEST(Learner, DivergenceNamesTheEpoch) {
  // Whether a huge step overflows depends on the width, so sweep a few.
  auto data = contradictory(blobs(40, 2.0, 0.5, 4));
  std::size_t diverged = 0;
  for (std::size_t h = 1; h <= 10; ++h) {
    NetConfig cfg;
    cfg.hidden_nodes = h;
    cfg.learning_rate = 1e308;
    try {
      train(data, cfg);
    } catch (const TrainingDiverged& e) {
      ++diverged;
      EXPECT_EQ(e.hidden_nodes(), h);
      EXPECT_LT(e.epoch(), cfg.epochs);
      EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
    }
  }
  EXPECT_GT(diverged, 0u);
}

TEST(Learner, RejectsInvalidConfig) {
  auto data = blobs(20, 2.0, 0.5, 4);
  NetConfig cfg;
  cfg.hidden_nodes = 0;
  EXPECT_THROW(train(data, cfg), Error);
  cfg.hidden_nodes = 1;
  cfg.learning_rate = -1;
  EXPECT_THROW(train(data, cfg), Error);
}

TEST(PredictProba, RowsAreStochasticAndIndependent) {
  auto data = blobs(100, 1.0, 1.0, 5);
  NetConfig cfg;
  cfg.hidden_nodes = 4;
  cfg.epochs = 20;
  TrainedModel model = train(data, cfg);

  Matrix probs = predict_proba(model, data.features());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double total = 0.0;
    for (double p : probs.row(r)) {
      EXPECT_GE(p, 0.0);
      EXPECT_LE(p, 1.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  }

  Matrix single = predict_proba(model, data.features().select_rows(std::vector<std::size_t>{7}));
  ASSERT_EQ(single.rows(), 1u);
  EXPECT_EQ(single(0, 0), probs(7, 0));

  Matrix dup = predict_proba(model, data.features().select_rows(std::vector<std::size_t>{3, 3}));
  EXPECT_EQ(dup(0, 0), dup(1, 0));
  EXPECT_EQ(dup(0, 1), dup(1, 1));

  std::vector<std::size_t> reversed(data.rows());
  std::iota(reversed.rbegin(), reversed.rend(), std::size_t{0});
  Matrix rev = predict_proba(model, data.features().select_rows(reversed));
  for (std::size_t r = 0; r < data.rows(); ++r)
    EXPECT_EQ(rev(r, 1), probs(data.rows() - 1 - r, 1));
}

TEST(PredictProba, DimensionMismatchIsAnError) {
  auto data = blobs(20, 2.0, 0.5, 4);
  NetConfig cfg;
  cfg.epochs = 1;
  TrainedModel model = train(data, cfg);
  EXPECT_THROW(predict_proba(model, Matrix(2, 3)), Error);
}

TEST(ZeroOneError, ConstantPredictorOnBalancedData) {
  // All-zero weights give uniform probabilities; the tie goes to class 0.
  NetConfig cfg;
  cfg.hidden_nodes = 2;
  TrainedModel constant(cfg, Standardization{{0.0, 0.0}, {1.0, 1.0}}, NetWeights::zeros(2, 2, 2));
  auto data = blobs(50, 2.0, 0.5, 6);
  EXPECT_DOUBLE_EQ(zero_one_error(constant, data), 0.5);
  EXPECT_DOUBLE_EQ(accuracy(constant, data), 1.0 - zero_one_error(constant, data));
  for (ClassId c : constant.predict(data.features())) EXPECT_EQ(c, 0u);
}

TEST(ZeroOneError, PerfectModelScoresZero) {
  auto data = blobs(100, 4.0, 0.3, 7);
  NetConfig cfg;
  cfg.hidden_nodes = 2;
  TrainedModel model = train(data, cfg);
  EXPECT_EQ(zero_one_error(model, data), 0.0);
}

TEST(Margin, TopTwoGap) {
  Matrix p(3, 3, {0.5, 0.5, 0.0,  //
                  1.0, 0.0, 0.0,  //
                  0.5, 0.3, 0.2});
  auto m = margins_from_probabilities(p);
  EXPECT_DOUBLE_EQ(m[0], 0.0);
  EXPECT_DOUBLE_EQ(m[1], 1.0);
  EXPECT_NEAR(m[2], 0.2, 1e-15);
}

TEST(Margin, LiesInUnitIntervalAndZeroOnlyOnTies) {
  auto data = blobs(200, 0.5, 1.0, 8);
  NetConfig cfg;
  cfg.hidden_nodes = 3;
  cfg.epochs = 10;
  TrainedModel model = train(data, cfg);
  auto m = margin(model, data.features());
  Matrix probs = predict_proba(model, data.features());
  for (std::size_t r = 0; r < m.size(); ++r) {
    EXPECT_GE(m[r], 0.0);
    EXPECT_LE(m[r], 1.0);
    EXPECT_EQ(m[r] == 0.0, probs(r, 0) == probs(r, 1));
  }
}

TEST(Standardization, ComesFromTrainingRowsOnly) {
  auto data = blobs(60, 2.0, 1.0, 9);
  NetConfig cfg;
  cfg.epochs = 1;
  TrainedModel model = train(data, cfg);
  Standardization expected = Standardization::fit(data.features());
  EXPECT_EQ(model.standardization(), expected);
  // Scoring other rows never moves the statistics.
  auto other = blobs(60, 9.0, 5.0, 10);
  predict_proba(model, other.features());
  EXPECT_EQ(model.standardization(), expected);
}

TEST(Persistence, JsonRoundTripIsLossless) {
  auto data = blobs(80, 1.0, 1.0, 11);
  NetConfig cfg;
  cfg.hidden_nodes = 4;
  cfg.epochs = 15;
  cfg.seed = 123456789012345ULL;
  TrainedModel model = train(data, cfg);
  auto dir = temp_dir("model_json");
  save_model((dir / "m.json").string(), model);
  TrainedModel back = load_model((dir / "m.json").string());
  EXPECT_EQ(back, model);
  EXPECT_EQ(predict_proba(back, data.features()), predict_proba(model, data.features()));
}

TEST(Persistence, RejectsForeignDocuments) {
  EXPECT_THROW(model_from_json(nlohmann::json{{"format", "other"}}), Error);
}
