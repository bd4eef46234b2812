#include <cmath>

#include <gtest/gtest.h>

#include "groomrisk/random.hpp"
#include "groomrisk/regressor.hpp"

namespace groomrisk {
namespace {

FeatureSpec dense_spec(std::size_t dim) { return FeatureSpec{EmbeddingSpec{dim}}; }

LinearModel model_with(std::vector<double> w, double b) {
  LinearModel m = LinearModel::zeros(dense_spec(w.size()));
  m.weights = std::move(w);
  m.bias = b;
  return m;
}

// Loss of the batch with every parameter taken from `params` (weights then bias).
double batch_loss(const std::vector<double>& params, std::span<const LabeledExample> batch) {
  const std::vector<double> w(params.begin(), params.end() - 1);
  const auto m = model_with(w, params.back());
  double acc = 0.0;
  for (const auto& ex : batch) {
    const double r = predict(m, *ex.features) - ex.label;
    acc += r * r;
  }
  return acc / static_cast<double>(batch.size());
}

TEST(Predict, Examples) {
  EXPECT_EQ(predict(model_with({0.0, 0.0}, 0.7), FeatureVector::dense({5.0, -3.0})), 0.7);
  EXPECT_EQ(predict(model_with({2.0}, 0.0), FeatureVector::dense({3.0})), 6.0);
  EXPECT_EQ(predict(model_with({1.0}, 0.0), FeatureVector::dense({-0.4}), /*clamp=*/true), 0.0);
  EXPECT_EQ(predict(model_with({1.0}, 0.0), FeatureVector::dense({-0.4})), -0.4);
  EXPECT_EQ(predict(model_with({1.0}, 0.0), FeatureVector::dense({14.0}), true), 12.0);
}

TEST(Predict, DimensionMismatch) {
  EXPECT_THROW(predict(model_with({1.0, 2.0}, 0.0), FeatureVector::dense({1.0})), ParameterError);
}

TEST(Predict, LinearInInput) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(6), x1(6), x2(6);
    // Small dyadic rationals keep every product exact.
    auto draw = [&] { return static_cast<double>(static_cast<long>(rng.below(65)) - 32) / 8.0; };
    for (std::size_t i = 0; i < 6; ++i) {
      w[i] = draw();
      x1[i] = draw();
      x2[i] = draw();
    }
    const double bias = draw();
    const double a = draw(), b = draw();
    std::vector<double> mix(6);
    for (std::size_t i = 0; i < 6; ++i) mix[i] = a * x1[i] + b * x2[i];
    const auto m = model_with(w, bias);
    const double lhs = predict(m, FeatureVector::dense(mix));
    const double rhs = a * predict(m, FeatureVector::dense(x1)) +
                       b * predict(m, FeatureVector::dense(x2)) - (a + b - 1.0) * bias;
    EXPECT_NEAR(lhs, rhs, 1e-9);
  }
}

TEST(MseGradient, PerfectPredictions) {
  const auto m = model_with({1.0, -1.0}, 0.5);
  const auto x = FeatureVector::dense({2.0, 1.0});
  const std::vector<LabeledExample> batch = {{&x, 1.5}};
  const auto g = mse_and_gradient(m, batch);
  EXPECT_EQ(g.loss, 0.0);
  EXPECT_EQ(g.grad_b, 0.0);
  for (double v : g.grad_w) EXPECT_EQ(v, 0.0);
}

TEST(MseGradient, SingleExample) {
  const auto m = model_with({0.0}, 0.0);
  const auto x = FeatureVector::dense({1.0});
  const std::vector<LabeledExample> batch = {{&x, 1.0}};
  const auto g = mse_and_gradient(m, batch);
  EXPECT_EQ(g.loss, 1.0);
  EXPECT_EQ(g.grad_w, std::vector<double>{-2.0});
  EXPECT_EQ(g.grad_b, -2.0);
}

TEST(MseGradient, EmptyBatch) {
  EXPECT_THROW(mse_and_gradient(model_with({0.0}, 0.0), {}), ParameterError);
}

// Central finite differences (h = 1e-6) as the oracle.
TEST(MseGradient, MatchesFiniteDifferences) {
  Rng rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t dim = 10;
    const std::size_t n = 1 + rng.below(8);
    std::vector<FeatureVector> xs;
    std::vector<LabeledExample> batch;
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<double> x(dim);
      for (auto& v : x) v = rng.uniform() * 2.0 - 1.0;
      xs.push_back(FeatureVector::dense(x));
    }
    for (std::size_t k = 0; k < n; ++k) batch.push_back({&xs[k], rng.uniform() * 12.0});
    std::vector<double> params(dim + 1);
    for (auto& p : params) p = rng.uniform() * 2.0 - 1.0;

    const std::vector<double> w(params.begin(), params.end() - 1);
    const auto g = mse_and_gradient(model_with(w, params.back()), batch);
    EXPECT_NEAR(g.loss, batch_loss(params, batch), 1e-12);

    std::vector<double> analytic = g.grad_w;
    analytic.push_back(g.grad_b);
    double diff2 = 0.0, norm_a = 0.0, norm_fd = 0.0;
    const double h = 1e-6;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto plus = params, minus = params;
      plus[i] += h;
      minus[i] -= h;
      const double fd = (batch_loss(plus, batch) - batch_loss(minus, batch)) / (2 * h);
      diff2 += (fd - analytic[i]) * (fd - analytic[i]);
      norm_a += analytic[i] * analytic[i];
      norm_fd += fd * fd;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(norm_a), std::sqrt(norm_fd), 1e-12});
    EXPECT_LT(rel, 1e-6) << "trial " << trial;
  }
}

TEST(Adam, OneStepDecreasesFullBatchLoss) {
  std::vector<FeatureVector> xs;
  std::vector<LabeledExample> batch;
  for (int k = 0; k <= 100; ++k) xs.push_back(FeatureVector::dense({k / 10.0}));
  for (int k = 0; k <= 100; ++k) batch.push_back({&xs[static_cast<std::size_t>(k)], 2.0 * k / 10.0});

  const TrainConfig cfg;  // lr 2e-5 and the usual moment parameters
  std::vector<double> params = {0.0, 0.0};
  const double before = batch_loss(params, batch);
  const auto g = mse_and_gradient(model_with({params[0]}, params[1]), batch);
  std::vector<double> grad = {g.grad_w[0], g.grad_b};
  AdamOptimizer adam(2, cfg);
  adam.step(params, grad);
  EXPECT_LT(batch_loss(params, batch), before);
  // First Adam step moves each parameter by ~lr against the gradient sign.
  EXPECT_NEAR(params[0], 2e-5, 1e-9);
  EXPECT_NEAR(params[1], 2e-5, 1e-9);
}

TEST(Train, AllZeroLabelsStayAtZero) {
  std::vector<FeatureVector> xs;
  std::vector<double> ys;
  for (int k = 0; k < 13; ++k) {
    xs.push_back(FeatureVector::sparse(64, {{static_cast<std::uint32_t>(k % 64), 1.0 + k}}));
    ys.push_back(0.0);
  }
  FeatureSpec spec{HashSpec{{1}, 64, 0}};
  const auto m = train_features(xs, ys, spec, TrainConfig{});
  for (double w : m.weights) EXPECT_EQ(w, 0.0);
  EXPECT_EQ(m.bias, 0.0);
  EXPECT_EQ(m.train_meta.final_loss, 0.0);
  EXPECT_EQ(m.train_meta.epoch_losses.size(), 5u);
}

TEST(Train, RecoversClosedFormSlope) {
  // Least squares through the origin on y = 2x gives exactly 2.
  std::vector<FeatureVector> xs;
  std::vector<double> ys;
  for (int k = 0; k <= 100; ++k) {
    xs.push_back(FeatureVector::dense({k / 10.0}));
    ys.push_back(2.0 * k / 10.0);
  }
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 200;
  cfg.fit_intercept = false;
  const auto m = train_features(xs, ys, dense_spec(1), cfg);
  EXPECT_GE(m.weights[0], 1.99);
  EXPECT_LE(m.weights[0], 2.01);
  EXPECT_EQ(m.bias, 0.0);
}

TEST(Train, DeterministicGivenSeed) {
  Rng rng(1);
  std::vector<FeatureVector> xs;
  std::vector<double> ys;
  for (int k = 0; k < 50; ++k) {
    std::vector<FeatureVector::Entry> e;
    for (int j = 0; j < 4; ++j) e.emplace_back(static_cast<std::uint32_t>(rng.below(256)), 1.0);
    xs.push_back(FeatureVector::sparse(256, e));
    ys.push_back(0.5 * static_cast<double>(rng.below(25)));
  }
  FeatureSpec spec{HashSpec{{1}, 256, 0}};
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.shuffle_seed = 9;
  const auto a = train_features(xs, ys, spec, cfg);
  const auto b = train_features(xs, ys, spec, cfg);
  EXPECT_EQ(a, b);
  cfg.shuffle_seed = 10;
  EXPECT_NE(train_features(xs, ys, spec, cfg).weights, a.weights);
}

TEST(Train, SparseSkippingMatchesDenseAdam) {
  // Reference: plain dense Adam over every parameter, same batches.
  Rng rng(77);
  std::vector<FeatureVector> xs;
  std::vector<double> ys;
  for (int k = 0; k < 9; ++k) {
    xs.push_back(FeatureVector::sparse(32, {{static_cast<std::uint32_t>(rng.below(32)), 1.0},
                                            {static_cast<std::uint32_t>(rng.below(32)), -1.0}}));
    ys.push_back(static_cast<double>(rng.below(5)));
  }
  FeatureSpec spec{HashSpec{{1}, 32, 0}};
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 3;
  cfg.shuffle_seed = 4;
  const auto fast = train_features(xs, ys, spec, cfg);

  std::vector<double> params(33, 0.0);
  AdamOptimizer adam(33, cfg);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle(cfg.shuffle_seed);
  for (int e = 0; e < cfg.epochs; ++e) {
    shuffle.shuffle(order);
    for (std::size_t s = 0; s < order.size(); s += 4) {
      std::vector<LabeledExample> batch;
      for (std::size_t k = s; k < std::min(order.size(), s + 4); ++k) {
        batch.push_back({&xs[order[k]], ys[order[k]]});
      }
      const auto g = mse_and_gradient(model_with({params.begin(), params.end() - 1}, params[32]), batch);
      std::vector<double> grad = g.grad_w;
      grad.push_back(g.grad_b);
      adam.step(params, grad);
    }
  }
  for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(fast.weights[i], params[i]) << i;
  EXPECT_EQ(fast.bias, params[32]);
}

TEST(Train, DivergenceIsReported) {
  // Adam steps are bounded by the learning rate, so only an absurd rate overflows.
  std::vector<FeatureVector> xs = {FeatureVector::dense({1.0}), FeatureVector::dense({2.0})};
  std::vector<double> ys = {1.0, 2.0};
  TrainConfig cfg;
  cfg.learning_rate = 1e300;
  try {
    train_features(xs, ys, dense_spec(1), cfg);
    FAIL();
  } catch (const TrainingDiverged& e) {
    EXPECT_NE(std::string(e.what()).find("smaller learning rate"), std::string::npos);
  }
}

TEST(Train, RejectsBadInputs) {
  std::vector<FeatureVector> xs = {FeatureVector::dense({1.0})};
  std::vector<double> ys = {1.0};
  TrainConfig cfg;
  EXPECT_THROW(train_features({}, {}, dense_spec(1), cfg), ParameterError);
  EXPECT_THROW(train_features(xs, ys, dense_spec(2), cfg), ParameterError);
  cfg.epochs = 0;
  EXPECT_THROW(train_features(xs, ys, dense_spec(1), cfg), ParameterError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg = {};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), ParameterError);
}

TEST(Train, ContextsLabelledWithRiskScore) {
  std::vector<ChatContext> data(2);
  data[0].context_id = "a:0";
  data[0].messages = {{"a", Group::LEO, 0, Speaker::Other, "zero"}};
  data[1].context_id = "a:1";
  data[1].messages = {{"a", Group::LEO, 1, Speaker::Other, "teal lantern"}};
  data[1].strategies.set("roleplay", 1.0);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 300;
  const FeatureSpec spec{HashSpec{{1, 2}, 1024, 0}};
  const auto m = train(data, spec, cfg);
  const auto feats = featurize(data, spec);
  EXPECT_NEAR(predict(m, feats[0]), 0.0, 0.05);
  EXPECT_NEAR(predict(m, feats[1]), 1.0, 0.05);
}

TEST(TrainConfig, Defaults) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.learning_rate, 2e-5);
  EXPECT_EQ(cfg.epochs, 5);
  EXPECT_EQ(cfg.batch_size, 4);
  EXPECT_EQ(cfg.adam_beta1, 0.9);
  EXPECT_EQ(cfg.adam_beta2, 0.999);
  EXPECT_EQ(cfg.adam_epsilon, 1e-8);
}

}  // namespace
}  // namespace groomrisk
