#pragma once

// Single-hidden-layer feed-forward classifier whose complexity is the number
// of logistic hidden units. Softmax output, mean cross-entropy, plain
// mini-batch gradient descent.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mapcx/dataset.hpp"
#include "mapcx/error.hpp"
#include "mapcx/random.hpp"

namespace mapcx {

struct NetConfig {
  std::size_t hidden_nodes = 1;
  std::size_t epochs = 200;
  double learning_rate = 0.5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  NetConfig with_hidden(std::size_t h) const {
    NetConfig c = *this;
    c.hidden_nodes = h;
    return c;
  }
  NetConfig with_seed(std::uint64_t s) const {
    NetConfig c = *this;
    c.seed = s;
    return c;
  }

  void validate() const {
    if (hidden_nodes < 1) throw Error("hidden_nodes must be at least 1");
    if (epochs < 1) throw Error("epochs must be at least 1");
    if (batch_size < 1) throw Error("batch_size must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw Error("learning_rate must be positive");
  }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

/// Network parameters. input_hidden is (n_inputs + 1) x hidden, row-major,
/// with the bias in the last row; hidden_output is (hidden + 1) x classes
/// laid out the same way.
struct NetWeights {
  std::size_t n_inputs = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;
  std::vector<double> input_hidden;
  std::vector<double> hidden_output;

  static NetWeights zeros(std::size_t n_inputs, std::size_t hidden, std::size_t classes) {
    return {n_inputs, hidden, classes, std::vector<double>((n_inputs + 1) * hidden, 0.0),
            std::vector<double>((hidden + 1) * classes, 0.0)};
  }

  std::size_t size() const noexcept { return input_hidden.size() + hidden_output.size(); }

  friend bool operator==(const NetWeights&, const NetWeights&) = default;
};

/// Per-feature affine map x -> (x - mean) / scale.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardization fit(const Matrix& x) {
    Standardization s{std::vector<double>(x.cols(), 0.0), std::vector<double>(x.cols(), 1.0)};
    const auto n = static_cast<double>(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) s.mean[c] += x(r, c);
    for (double& m : s.mean) m /= n;
    std::vector<double> var(x.cols(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) {
        double d = x(r, c) - s.mean[c];
        var[c] += d * d;
      }
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double sd = std::sqrt(var[c] / n);
      s.scale[c] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - mean[c]) / scale[c];
    return out;
  }

  friend bool operator==(const Standardization&, const Standardization&) = default;
};

namespace detail {

inline double logistic(double a) {
  if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
  double e = std::exp(a);
  return e / (1.0 + e);
}

// Forward pass for one row. `hidden` receives the logistic activations,
// `probs` the softmax output.
inline void forward_row(const NetWeights& w, std::span<const double> x, std::span<double> hidden,
                        std::span<double> probs) {
  const std::size_t h = w.hidden;
  const std::size_t k = w.classes;
  const double* bias1 = w.input_hidden.data() + w.n_inputs * h;
  std::copy_n(bias1, h, hidden.begin());
  for (std::size_t i = 0; i < w.n_inputs; ++i) {
    const double xi = x[i];
    const double* wi = w.input_hidden.data() + i * h;
    for (std::size_t j = 0; j < h; ++j) hidden[j] += xi * wi[j];
  }
  for (std::size_t j = 0; j < h; ++j) hidden[j] = logistic(hidden[j]);

  const double* bias2 = w.hidden_output.data() + h * k;
  std::copy_n(bias2, k, probs.begin());
  for (std::size_t j = 0; j < h; ++j) {
    const double sj = hidden[j];
    const double* wj = w.hidden_output.data() + j * k;
    for (std::size_t c = 0; c < k; ++c) probs[c] += sj * wj[c];
  }
  double top = *std::max_element(probs.begin(), probs.end());
  double total = 0.0;
  for (double& p : probs) {
    p = std::exp(p - top);
    total += p;
  }
  for (double& p : probs) p /= total;
}

}  // namespace detail

/// Mean cross-entropy over `rows` of (already standardized) `x`. When `grad`
/// is non-null it is overwritten with the gradient of that mean.
inline double loss_and_gradient(const NetWeights& w, const Matrix& x, std::span<const ClassId> y,
                                std::span<const std::size_t> rows, NetWeights* grad) {
  const std::size_t h = w.hidden;
  const std::size_t k = w.classes;
  if (grad) {
    *grad = NetWeights::zeros(w.n_inputs, h, k);
  }
  std::vector<double> hidden(h), probs(k), dz(k), da(h);
  double loss = 0.0;
  for (std::size_t r : rows) {
    auto xr = x.row(r);
    detail::forward_row(w, xr, hidden, probs);
    loss -= std::log(std::max(probs[y[r]], 1e-300));
    if (!grad) continue;
    for (std::size_t c = 0; c < k; ++c) dz[c] = probs[c] - (c == y[r] ? 1.0 : 0.0);
    for (std::size_t j = 0; j < h; ++j) {
      const double* wj = w.hidden_output.data() + j * k;
      double* gj = grad->hidden_output.data() + j * k;
      double back = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        gj[c] += hidden[j] * dz[c];
        back += wj[c] * dz[c];
      }
      da[j] = back * hidden[j] * (1.0 - hidden[j]);
    }
    double* gb2 = grad->hidden_output.data() + h * k;
    for (std::size_t c = 0; c < k; ++c) gb2[c] += dz[c];
    for (std::size_t i = 0; i < w.n_inputs; ++i) {
      const double xi = xr[i];
      double* gi = grad->input_hidden.data() + i * h;
      for (std::size_t j = 0; j < h; ++j) gi[j] += xi * da[j];
    }
    double* gb1 = grad->input_hidden.data() + w.n_inputs * h;
    for (std::size_t j = 0; j < h; ++j) gb1[j] += da[j];
  }
  const auto n = static_cast<double>(rows.size());
  if (grad) {
    for (double& g : grad->input_hidden) g /= n;
    for (double& g : grad->hidden_output) g /= n;
  }
  return loss / n;
}

/// Xavier-style uniform initialization with zero biases.
inline NetWeights initialize_weights(std::size_t n_inputs, std::size_t hidden, std::size_t classes,
                                     std::uint64_t seed) {
  NetWeights w = NetWeights::zeros(n_inputs, hidden, classes);
  Rng rng(seed);
  std::uniform_real_distribution<double> u1(-1.0, 1.0);
  const double lim1 = std::sqrt(6.0 / static_cast<double>(n_inputs + hidden));
  const double lim2 = std::sqrt(6.0 / static_cast<double>(hidden + classes));
  for (std::size_t i = 0; i < n_inputs * hidden; ++i) w.input_hidden[i] = lim1 * u1(rng);
  for (std::size_t j = 0; j < hidden * classes; ++j) w.hidden_output[j] = lim2 * u1(rng);
  return w;
}

/// Number of networks trained by this process so far.
inline std::atomic<std::uint64_t>& training_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

inline std::uint64_t models_trained() { return training_counter().load(); }

/// A trained classifier: configuration, input standardization and weights.
class TrainedModel {
 public:
  TrainedModel(NetConfig config, Standardization standardization, NetWeights weights)
      : config_(config), standardization_(std::move(standardization)), weights_(std::move(weights)) {
    if (standardization_.mean.size() != weights_.n_inputs ||
        standardization_.scale.size() != weights_.n_inputs)
      throw Error("standardization width does not match network inputs");
    if (weights_.hidden != config_.hidden_nodes) throw Error("weights do not match hidden_nodes");
    if (weights_.classes < 2) throw Error("network needs at least 2 output classes");
    if (weights_.input_hidden.size() != (weights_.n_inputs + 1) * weights_.hidden ||
        weights_.hidden_output.size() != (weights_.hidden + 1) * weights_.classes)
      throw Error("weight arrays do not match network shape");
  }

  const NetConfig& config() const noexcept { return config_; }
  const Standardization& standardization() const noexcept { return standardization_; }
  const NetWeights& weights() const noexcept { return weights_; }
  std::size_t n_inputs() const noexcept { return weights_.n_inputs; }
  std::size_t class_count() const noexcept { return weights_.classes; }

  Matrix predict_proba(const Matrix& features) const {
    if (features.cols() != n_inputs())
      throw Error("feature width " + std::to_string(features.cols()) +
                  " does not match model input width " + std::to_string(n_inputs()));
    Matrix probs(features.rows(), class_count());
    std::vector<double> hidden(weights_.hidden), z(n_inputs());
    for (std::size_t r = 0; r < features.rows(); ++r) {
      auto xr = features.row(r);
      for (std::size_t c = 0; c < z.size(); ++c)
        z[c] = (xr[c] - standardization_.mean[c]) / standardization_.scale[c];
      detail::forward_row(weights_, z, hidden, probs.row(r));
    }
    return probs;
  }

  /// Argmax class per row; ties go to the lowest class index.
  std::vector<ClassId> predict(const Matrix& features) const {
    Matrix probs = predict_proba(features);
    std::vector<ClassId> out(probs.rows());
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      auto p = probs.row(r);
      out[r] = static_cast<ClassId>(std::max_element(p.begin(), p.end()) - p.begin());
    }
    return out;
  }

  friend bool operator==(const TrainedModel&, const TrainedModel&) = default;

 private:
  NetConfig config_;
  Standardization standardization_;
  NetWeights weights_;
};

/// Trains for exactly config.epochs passes. Initialization and the per-epoch
/// shuffles are drawn from streams derived from config.seed.
inline TrainedModel train(const LabeledTable& data, const NetConfig& config) {
  config.validate();
  training_counter().fetch_add(1);
  Standardization standardization = Standardization::fit(data.features());
  const Matrix x = standardization.apply(data.features());
  NetWeights w = initialize_weights(data.n_features(), config.hidden_nodes, data.class_count(),
                                    derive_seed(config.seed, Stream::init));
  NetWeights grad;
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config.seed, Stream::shuffle));
  const std::span<const std::size_t> all(order);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      auto batch = all.subspan(start, std::min(config.batch_size, order.size() - start));
      epoch_loss += loss_and_gradient(w, x, data.labels(), batch, &grad) *
                    static_cast<double>(batch.size());
      for (std::size_t i = 0; i < w.input_hidden.size(); ++i)
        w.input_hidden[i] -= config.learning_rate * grad.input_hidden[i];
      for (std::size_t i = 0; i < w.hidden_output.size(); ++i)
        w.hidden_output[i] -= config.learning_rate * grad.hidden_output[i];
    }
    if (!std::isfinite(epoch_loss)) throw TrainingDiverged(epoch, config.hidden_nodes);
  }
  return {config, std::move(standardization), std::move(w)};
}

inline Matrix predict_proba(const TrainedModel& model, const Matrix& features) {
  return model.predict_proba(features);
}

/// Fraction of rows whose argmax class differs from the label.
inline double zero_one_error(const TrainedModel& model, const LabeledTable& data) {
  auto predicted = model.predict(data.features());
  std::size_t wrong = 0;
  for (std::size_t r = 0; r < predicted.size(); ++r) wrong += predicted[r] != data.labels()[r];
  return static_cast<double>(wrong) / static_cast<double>(data.rows());
}

inline double accuracy(const TrainedModel& model, const LabeledTable& data) {
  return 1.0 - zero_one_error(model, data);
}

/// Gap between the two largest entries of each probability row.
inline std::vector<double> margins_from_probabilities(const Matrix& probs) {
  std::vector<double> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    double first = -1.0, second = -1.0;
    for (double p : probs.row(r)) {
      if (p > first) {
        second = first;
        first = p;
      } else if (p > second) {
        second = p;
      }
    }
    out[r] = first - second;
  }
  return out;
}

inline std::vector<double> margin(const TrainedModel& model, const Matrix& features) {
  return margins_from_probabilities(model.predict_proba(features));
}

// ---------------------------------------------------------------- persistence
//
// Models persist as JSON:
//   { "format": "mapcx.model", "version": 1,
//     "config": {hidden_nodes, epochs, learning_rate, batch_size, seed},
//     "n_inputs", "classes",
//     "standardization": {"mean": [...], "scale": [...]},
//     "input_hidden": [...], "hidden_output": [...] }
// Doubles are written in shortest round-trip form, so save/load is lossless.

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json to_json(const NetConfig& c) {
  return {{"hidden_nodes", c.hidden_nodes},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

inline NetConfig net_config_from_json(const nlohmann::json& j) {
  NetConfig c;
  c.hidden_nodes = j.at("hidden_nodes").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline nlohmann::json to_json(const TrainedModel& m) {
  return {{"format", "mapcx.model"},
          {"version", kModelFormatVersion},
          {"config", to_json(m.config())},
          {"n_inputs", m.weights().n_inputs},
          {"classes", m.weights().classes},
          {"standardization",
           {{"mean", m.standardization().mean}, {"scale", m.standardization().scale}}},
          {"input_hidden", m.weights().input_hidden},
          {"hidden_output", m.weights().hidden_output}};
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "mapcx.model") throw Error("not a mapcx model document");
  if (j.at("version").get<int>() != kModelFormatVersion)
    throw Error("unsupported model format version");
  NetConfig config = net_config_from_json(j.at("config"));
  Standardization s{j.at("standardization").at("mean").get<std::vector<double>>(),
                    j.at("standardization").at("scale").get<std::vector<double>>()};
  NetWeights w{j.at("n_inputs").get<std::size_t>(), config.hidden_nodes,
               j.at("classes").get<std::size_t>(),
               j.at("input_hidden").get<std::vector<double>>(),
               j.at("hidden_output").get<std::vector<double>>()};
  return {config, std::move(s), std::move(w)};
}

inline void save_model(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model file: " + path);
  out << to_json(model).dump(2) << '\n';
}

inline TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file: " + path);
  return model_from_json(nlohmann::json::parse(in));
}

}  // namespace mapcx
