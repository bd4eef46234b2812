#include <sstream>

#include <gtest/gtest.h>

#include "groomrisk/model_io.hpp"
#include "groomrisk/random.hpp"

namespace groomrisk {
namespace {

LinearModel random_model(Rng& rng, std::size_t dim) {
  auto m = LinearModel::zeros(FeatureSpec{HashSpec{{1, 2}, dim, 3}});
  for (auto& w : m.weights) w = rng.uniform() * 2.0 - 1.0;
  m.bias = rng.uniform();
  m.train_meta.config.shuffle_seed = 12;
  m.train_meta.examples = 7;
  m.train_meta.epoch_losses = {1.0 / 3.0, 0.1, 1e-17};
  m.train_meta.final_loss = 0.1 / 7.0;
  return m;
}

std::string serialized(const LinearModel& m) {
  std::ostringstream out;
  save_model(out, m);
  return out.str();
}

TEST(ModelIo, RoundTripIsBitExact) {
  Rng rng(31);
  const auto m = random_model(rng, 4096);
  std::istringstream in(serialized(m));
  const auto loaded = load_model(in);
  EXPECT_EQ(loaded, m);

  for (int i = 0; i < 100; ++i) {
    std::vector<FeatureVector::Entry> e;
    for (int j = 0; j < 10; ++j) {
      e.emplace_back(static_cast<std::uint32_t>(rng.below(4096)), rng.uniform() * 4.0 - 2.0);
    }
    const auto fv = FeatureVector::sparse(4096, e);
    EXPECT_EQ(predict(loaded, fv), predict(m, fv));
  }
}

TEST(ModelIo, BundleRoundTrip) {
  Rng rng(2);
  ModelBundle bundle{{"LEO", random_model(rng, 64)}, {"Victim", random_model(rng, 64)}};
  std::stringstream io;
  save_bundle(io, bundle);
  EXPECT_EQ(load_bundle(io), bundle);
}

TEST(ModelIo, TruncatedFileRejected) {
  Rng rng(4);
  const auto bytes = serialized(random_model(rng, 128));
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() / 2,
                          bytes.size() - 1}) {
    std::istringstream in(bytes.substr(0, cut));
    EXPECT_THROW(load_model(in), DataError) << "cut at " << cut;
  }
}

TEST(ModelIo, VersionMismatchRejected) {
  Rng rng(4);
  auto bytes = serialized(random_model(rng, 16));
  bytes[8] = 9;  // first byte of the little-endian version field
  std::istringstream in(bytes);
  try {
    load_model(in);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(ModelIo, HashModelRejectsEmbeddingVector) {
  Rng rng(5);
  const auto m = random_model(rng, std::size_t{1} << 18);
  std::vector<double> embedding(384, 0.25);
  EXPECT_THROW(predict(m, FeatureVector::dense(embedding)), ParameterError);
}

TEST(ModelIo, SaveIsDeterministic) {
  Rng a(6), b(6);
  EXPECT_EQ(serialized(random_model(a, 256)), serialized(random_model(b, 256)));
}

}  // namespace
}  // namespace groomrisk
