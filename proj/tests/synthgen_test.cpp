#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "groomrisk/features.hpp"
#include "groomrisk/synthgen.hpp"

namespace groomrisk {
namespace {

SynthConfig small(std::uint64_t seed = 42) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.conversations_per_group = 12;
  return cfg;
}

std::string serialize(const std::vector<ChatContext>& corpus) {
  std::ostringstream out;
  write_corpus<ChatContext>(out, corpus);
  return out.str();
}

TEST(Synthgen, ByteIdenticalForSameSeed) {
  EXPECT_EQ(serialize(generate(small())), serialize(generate(small())));
  EXPECT_NE(serialize(generate(small(1))), serialize(generate(small(2))));
}

TEST(Synthgen, ZeroDensityMeansZeroLabels) {
  auto cfg = small();
  cfg.strategy_density = 0.0;
  for (const auto& c : generate(cfg)) EXPECT_EQ(c.risk_score(), 0.0);
}

TEST(Synthgen, FullDensityNoPartialsMeansTwelve) {
  auto cfg = small();
  cfg.strategy_density = 1.0;
  cfg.partial_probability = 0.0;
  for (const auto& c : generate(cfg)) EXPECT_EQ(c.risk_score(), 12.0);
}

TEST(Synthgen, EmitsAllGroupsAndValidContexts) {
  const auto corpus = generate(small());
  std::set<Group> groups;
  for (const auto& c : corpus) groups.insert(c.group);
  EXPECT_EQ(groups.size(), 3u);

  // Every record survives the corpus validator unchanged.
  std::istringstream in(serialize(corpus));
  EXPECT_EQ(parse_context_corpus(in), corpus);
}

TEST(Synthgen, PlantedCuesPresentAndLabelsExact) {
  auto cfg = small(5);
  cfg.strategy_density = 0.3;
  for (const auto& c : generate(cfg)) {
    const std::string text = window_text(c);
    double sum = 0.0;
    for (std::size_t s = 0; s < kNumStrategies; ++s) {
      const double v = c.strategies[s];
      sum += v;
      const auto& phrases = cfg.strategy_cue_lexicons.at(std::string(kStrategySlugs[s]));
      bool found = false;
      for (const auto& p : phrases) {
        const std::string needle = v == 0.5 ? cfg.weak_prefix + " " + p : p;
        if (text.find(needle) != std::string::npos) found = true;
      }
      EXPECT_EQ(found, v > 0.0) << c.context_id << " " << kStrategySlugs[s];
    }
    EXPECT_EQ(c.risk_score(), sum);
  }
}

TEST(Synthgen, FillerNeverContainsCueTokens) {
  SynthConfig cfg;
  std::set<std::string> cue_tokens = {cfg.weak_prefix};
  for (const auto& [slug, phrases] : cfg.strategy_cue_lexicons) {
    for (const auto& p : phrases) {
      for (const auto& t : tokenize(p)) cue_tokens.insert(t);
    }
  }
  auto zero = small();
  zero.strategy_density = 0.0;
  for (const auto& c : generate(zero)) {
    for (const auto& t : tokenize(window_text(c))) EXPECT_FALSE(cue_tokens.contains(t)) << t;
  }
}

TEST(Synthgen, EmptyAndInvalidConfigs) {
  auto cfg = small();
  cfg.conversations_per_group = 0;
  EXPECT_TRUE(generate(cfg).empty());
  cfg = small();
  cfg.strategy_density = 1.5;
  EXPECT_THROW(generate(cfg), ParameterError);
  cfg = small();
  cfg.strategy_cue_lexicons.at("secrecy").clear();
  EXPECT_THROW(generate(cfg), ParameterError);
  cfg = small();
  cfg.min_turns = 5;
  cfg.max_turns = 4;
  EXPECT_THROW(generate(cfg), ParameterError);
}

TEST(Synthgen, ConfigJsonRoundTrip) {
  auto cfg = small(77);
  cfg.partial_probability = 0.125;
  EXPECT_EQ(nlohmann::json(cfg).get<SynthConfig>(), cfg);
}

}  // namespace
}  // namespace groomrisk
