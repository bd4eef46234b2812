#pragma once

// Linear regression head over feature vectors, trained with Adam on the
// mean squared error between predicted and annotated risk.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "groomrisk/annotations.hpp"
#include "groomrisk/error.hpp"
#include "groomrisk/features.hpp"
#include "groomrisk/random.hpp"

namespace groomrisk {

/// Defaults: Adam, learning rate 2e-5, 5 epochs, batch size 4. The moment
/// decay rates and epsilon are Adam's customary defaults.
struct TrainConfig {
  double learning_rate = 2e-5;
  int epochs = 5;
  int batch_size = 4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;
  bool fit_intercept = true;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ParameterError("learning rate must be > 0");
    }
    if (epochs < 1) throw ParameterError("epochs must be >= 1");
    if (batch_size < 1) throw ParameterError("batch size must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ParameterError("adam_beta1 must be in [0,1)");
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ParameterError("adam_beta2 must be in [0,1)");
    if (!(adam_epsilon > 0.0)) throw ParameterError("adam_epsilon must be > 0");
  }

  bool operator==(const TrainConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"optimizer", "adam"},
       {"learning_rate", c.learning_rate},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"adam_beta1", c.adam_beta1},
       {"adam_beta2", c.adam_beta2},
       {"adam_epsilon", c.adam_epsilon},
       {"shuffle_seed", c.shuffle_seed},
       {"fit_intercept", c.fit_intercept}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (j.contains("optimizer") && j.at("optimizer").get<std::string>() != "adam") {
    throw ParameterError("only the adam optimizer is supported");
  }
  if (j.contains("learning_rate")) c.learning_rate = j.at("learning_rate").get<double>();
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("adam_beta1")) c.adam_beta1 = j.at("adam_beta1").get<double>();
  if (j.contains("adam_beta2")) c.adam_beta2 = j.at("adam_beta2").get<double>();
  if (j.contains("adam_epsilon")) c.adam_epsilon = j.at("adam_epsilon").get<double>();
  if (j.contains("shuffle_seed")) c.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
  if (j.contains("fit_intercept")) c.fit_intercept = j.at("fit_intercept").get<bool>();
}

struct TrainMeta {
  TrainConfig config;
  std::size_t examples = 0;
  double final_loss = 0.0;
  std::vector<double> epoch_losses;

  bool operator==(const TrainMeta&) const = default;
};

inline void to_json(nlohmann::json& j, const TrainMeta& m) {
  j = {{"config", m.config},
       {"examples", m.examples},
       {"final_loss", m.final_loss},
       {"epoch_losses", m.epoch_losses}};
}

inline void from_json(const nlohmann::json& j, TrainMeta& m) {
  m.config = j.at("config").get<TrainConfig>();
  m.examples = j.at("examples").get<std::size_t>();
  m.final_loss = j.at("final_loss").get<double>();
  m.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
}

struct LinearModel {
  FeatureSpec feature_spec;
  std::vector<double> weights;
  double bias = 0.0;
  TrainMeta train_meta;

  static LinearModel zeros(const FeatureSpec& spec) {
    spec.validate();
    LinearModel m;
    m.feature_spec = spec;
    m.weights.assign(spec.dimension(), 0.0);
    return m;
  }

  bool operator==(const LinearModel&) const = default;
};

/// w.x + b, optionally clamped to the attainable score range [0, 12].
inline double predict(const LinearModel& model, const FeatureVector& fv, bool clamp = false) {
  if (fv.dimension() != model.weights.size()) {
    throw ParameterError("feature dimension " + std::to_string(fv.dimension()) +
                         " does not match model dimension " + std::to_string(model.weights.size()));
  }
  const double y = fv.dot(model.weights) + model.bias;
  return clamp ? std::clamp(y, 0.0, static_cast<double>(kNumStrategies)) : y;
}

struct LabeledExample {
  const FeatureVector* features;
  double label;
};

struct MseGradient {
  double loss = 0.0;
  std::vector<double> grad_w;
  double grad_b = 0.0;
};

namespace detail {

// Adds d(mean squared error)/dw into grad (pre-sized) and returns (loss, grad_b).
// The reduction order is the batch order, so results are bit-reproducible.
template <typename OnTouch>
std::pair<double, double> accumulate_mse_gradient(std::span<const double> weights, double bias,
                                                  std::span<const LabeledExample> batch,
                                                  std::span<double> grad, OnTouch&& on_touch) {
  if (batch.empty()) throw ParameterError("empty batch");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  double grad_b = 0.0;
  for (const auto& ex : batch) {
    if (ex.features->dimension() != weights.size()) {
      throw ParameterError("feature dimension " + std::to_string(ex.features->dimension()) +
                           " does not match model dimension " + std::to_string(weights.size()));
    }
    const double residual = ex.features->dot(weights) + bias - ex.label;
    loss += residual * residual;
    const double coeff = 2.0 * residual * inv_n;
    grad_b += coeff;
    ex.features->for_each([&](std::size_t i, double x) {
      grad[i] += coeff * x;
      on_touch(i);
    });
  }
  return {loss * inv_n, grad_b};
}

}  // namespace detail

/// Mean squared error over the batch and its exact gradient with respect to
/// the weights and the bias.
inline MseGradient mse_and_gradient(const LinearModel& model,
                                    std::span<const LabeledExample> batch) {
  MseGradient out;
  out.grad_w.assign(model.weights.size(), 0.0);
  auto [loss, gb] = detail::accumulate_mse_gradient(model.weights, model.bias, batch, out.grad_w,
                                                    [](std::size_t) {});
  out.loss = loss;
  out.grad_b = gb;
  return out;
}

/// Adam over a flat parameter vector. Parameters whose gradient has never been
/// stored have zero moments, for which the Adam update is exactly zero; those
/// are skipped, which keeps sparse training cheap without changing results.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t num_params, const TrainConfig& cfg)
      : cfg_(cfg), m_(num_params, 0.0), v_(num_params, 0.0), active_(num_params, 0) {}

  /// grad is a dense gradient; `touched` lists indices whose entries may be
  /// non-zero (duplicates allowed). All touched entries of grad are reset to 0.
  void step(std::span<double> params, std::span<double> grad, std::span<const std::size_t> touched) {
    for (std::size_t i : touched) {
      if (!active_[i]) {
        active_[i] = 1;
        active_list_.push_back(i);
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
    const double b1 = cfg_.adam_beta1;
    const double b2 = cfg_.adam_beta2;
    for (std::size_t i : active_list_) {
      const double g = grad[i];
      m_[i] = b1 * m_[i] + (1.0 - b1) * g;
      v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
      const double m_hat = m_[i] / c1;
      const double v_hat = v_[i] / c2;
      params[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.adam_epsilon);
      grad[i] = 0.0;
    }
  }

  /// Dense convenience overload: every parameter is considered touched.
  void step(std::span<double> params, std::span<double> grad) {
    std::vector<std::size_t> all(params.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    step(params, grad, all);
  }

  long steps() const { return t_; }

 private:
  TrainConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::vector<std::uint8_t> active_;
  std::vector<std::size_t> active_list_;
  long t_ = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean squared error of the model over a labelled set.
inline double mean_squared_error(const LinearModel& model, std::span<const FeatureVector> features,
                                 std::span<const double> labels) {
  if (features.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double r = predict(model, features[i]) - labels[i];
    acc += r * r;
  }
  return acc / static_cast<double>(features.size());
}

/// Trains a zero-initialised linear head with mini-batch Adam. Each epoch visits
/// the examples in an order drawn from a generator seeded with shuffle_seed;
/// the last batch of an epoch may be short.
inline LinearModel train_features(std::span<const FeatureVector> features,
                                  std::span<const double> labels, const FeatureSpec& spec,
                                  const TrainConfig& cfg) {
  cfg.validate();
  if (features.empty()) throw ParameterError("training set is empty");
  if (features.size() != labels.size()) throw ParameterError("features and labels differ in length");
  const std::size_t dim = spec.dimension();
  for (const auto& fv : features) {
    if (fv.dimension() != dim) {
      throw ParameterError("feature dimension " + std::to_string(fv.dimension()) +
                           " does not match spec dimension " + std::to_string(dim));
    }
  }

  // Parameter layout: weights followed by the bias.
  std::vector<double> params(dim + 1, 0.0);
  std::vector<double> grad(dim + 1, 0.0);
  const std::span<const double> weights(params.data(), dim);
  std::vector<std::size_t> touched;
  AdamOptimizer adam(dim + 1, cfg);

  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(cfg.shuffle_seed);
  std::vector<LabeledExample> batch;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  const auto diverged = [](int epoch) {
    return TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                            " (non-finite loss); try a smaller learning rate");
  };

  std::vector<double> epoch_losses;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch.push_back({&features[order[k]], labels[order[k]]});
      }
      touched.clear();
      auto [loss, grad_b] = detail::accumulate_mse_gradient(
          weights, params[dim], batch, grad, [&](std::size_t i) { touched.push_back(i); });
      if (!std::isfinite(loss)) throw diverged(epoch + 1);
      epoch_loss += loss * static_cast<double>(batch.size());
      if (cfg.fit_intercept) {
        grad[dim] = grad_b;
        touched.push_back(dim);
      }
      adam.step(params, grad, touched);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) throw diverged(epoch + 1);
    epoch_losses.push_back(epoch_loss);
  }

  LinearModel model;
  model.feature_spec = spec;
  model.weights.assign(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(dim));
  model.bias = params[dim];
  model.train_meta.epoch_losses = std::move(epoch_losses);
  model.train_meta.config = cfg;
  model.train_meta.examples = features.size();
  model.train_meta.final_loss = mean_squared_error(model, features, labels);
  if (!std::isfinite(model.train_meta.final_loss)) throw diverged(cfg.epochs);
  return model;
}

/// Trains on contexts labelled with their aggregated risk score.
inline LinearModel train(std::span<const ChatContext> dataset, const FeatureSpec& spec,
                         const TrainConfig& cfg, const EmbeddingTable* embeddings = nullptr) {
  if (dataset.empty()) throw ParameterError("training set is empty");
  const auto features = featurize(dataset, spec, embeddings);
  std::vector<double> labels;
  labels.reserve(dataset.size());
  for (const auto& c : dataset) labels.push_back(c.risk_score());
  return train_features(features, labels, spec, cfg);
}

}  // namespace groomrisk
