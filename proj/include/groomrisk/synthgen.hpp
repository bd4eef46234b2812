#pragma once

// Seeded synthetic corpora with planted, innocuous cue phrases. Labels are
// exact by construction: a context's risk score is the sum of the strategy
// values planted in it, and each planted value leaves a lexical trace in the
// window text that a linear model over n-grams can pick up.

#include <array>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "groomrisk/annotations.hpp"
#include "groomrisk/error.hpp"
#include "groomrisk/random.hpp"

namespace groomrisk {

using CueLexicons = std::map<std::string, std::vector<std::string>>;

/// Placeholder cue phrases, two per strategy. Deliberately meaningless.
inline CueLexicons default_cue_lexicons() {
  const std::array<const char*, kNumStrategies> colours = {
      "crimson", "golden", "silver", "cobalt", "amber",  "ivory",
      "scarlet", "indigo", "olive",  "coral",  "teal",   "violet"};
  CueLexicons lex;
  for (std::size_t i = 0; i < kNumStrategies; ++i) {
    const std::string c = colours[i];
    lex[std::string(kStrategySlugs[i])] = {c + " lantern", c + " pebble"};
  }
  return lex;
}

struct SynthConfig {
  std::uint64_t seed = 42;
  int conversations_per_group = 200;
  int min_turns = 6;
  int max_turns = 12;
  int window_size = kDefaultWindow;
  double strategy_density = 0.15;
  double partial_probability = 0.3;
  // Prepended to a cue phrase to mark a partial (0.5) occurrence.
  std::string weak_prefix = "faintly";
  CueLexicons strategy_cue_lexicons = default_cue_lexicons();

  void validate() const {
    if (conversations_per_group < 0) throw ParameterError("conversations_per_group must be >= 0");
    if (min_turns < 1 || max_turns < min_turns) {
      throw ParameterError("turn range must satisfy 1 <= min_turns <= max_turns");
    }
    if (window_size < 1) throw ParameterError("window_size must be >= 1");
    if (!(strategy_density >= 0.0 && strategy_density <= 1.0)) {
      throw ParameterError("strategy_density must be in [0,1]");
    }
    if (!(partial_probability >= 0.0 && partial_probability <= 1.0)) {
      throw ParameterError("partial_probability must be in [0,1]");
    }
    if (weak_prefix.empty()) throw ParameterError("weak_prefix must be non-empty");
    for (auto slug : kStrategySlugs) {
      auto it = strategy_cue_lexicons.find(std::string(slug));
      if (it == strategy_cue_lexicons.end() || it->second.empty()) {
        throw ParameterError("no cue phrase for strategy '" + std::string(slug) + "'");
      }
      for (const auto& p : it->second) {
        if (p.find_first_not_of(" \t") == std::string::npos) {
          throw ParameterError("empty cue phrase for strategy '" + std::string(slug) + "'");
        }
      }
    }
    for (const auto& [slug, _] : strategy_cue_lexicons) {
      if (!strategy_index(slug)) throw ParameterError("unknown strategy slug '" + slug + "'");
    }
  }

  bool operator==(const SynthConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = {{"seed", c.seed},
       {"conversations_per_group", c.conversations_per_group},
       {"min_turns", c.min_turns},
       {"max_turns", c.max_turns},
       {"window_size", c.window_size},
       {"strategy_density", c.strategy_density},
       {"partial_probability", c.partial_probability},
       {"weak_prefix", c.weak_prefix},
       {"strategy_cue_lexicons", c.strategy_cue_lexicons}};
}

inline void from_json(const nlohmann::json& j, SynthConfig& c) {
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("conversations_per_group")) {
    c.conversations_per_group = j.at("conversations_per_group").get<int>();
  }
  if (j.contains("min_turns")) c.min_turns = j.at("min_turns").get<int>();
  if (j.contains("max_turns")) c.max_turns = j.at("max_turns").get<int>();
  if (j.contains("window_size")) c.window_size = j.at("window_size").get<int>();
  if (j.contains("strategy_density")) c.strategy_density = j.at("strategy_density").get<double>();
  if (j.contains("partial_probability")) {
    c.partial_probability = j.at("partial_probability").get<double>();
  }
  if (j.contains("weak_prefix")) c.weak_prefix = j.at("weak_prefix").get<std::string>();
  if (j.contains("strategy_cue_lexicons")) {
    c.strategy_cue_lexicons = j.at("strategy_cue_lexicons").get<CueLexicons>();
  }
}

namespace detail {

inline const std::vector<std::string>& shared_filler() {
  static const std::vector<std::string> words = {
      "hey",  "ok",   "lol",   "yeah", "what", "you",  "doing", "today", "cool", "really",
      "i",    "am",   "the",   "so",   "just", "that", "is",    "fun",   "and",  "we",
      "were", "there", "later", "now", "sure", "nice", "haha",  "how",   "was",  "it"};
  return words;
}

// Style shift between groups: each draws part of its filler from its own pool.
inline const std::vector<std::string>& group_filler(Group g) {
  static const std::vector<std::string> leo = {"school", "homework", "bus",     "teacher",
                                               "class",  "lunch",    "weekend", "soccer"};
  static const std::vector<std::string> victim = {"music", "phone", "movie", "friends",
                                                  "mall",  "song",  "video", "party"};
  static const std::vector<std::string> decoy = {"game", "level",  "pizza", "dog",
                                                 "bike", "park",   "summer", "beach"};
  switch (g) {
    case Group::LEO: return leo;
    case Group::Victim: return victim;
    case Group::Decoy: return decoy;
  }
  return leo;
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ' ') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

inline std::string conversation_name(Group g, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", index);
  std::string prefix(to_string(g));
  for (auto& ch : prefix) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return prefix + "-" + buf;
}

}  // namespace detail

/// Context-level synthetic corpus, ordered by group, conversation, turn.
/// Deterministic in cfg (all randomness comes from one generator seeded with cfg.seed).
inline std::vector<ChatContext> generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<ChatContext> out;
  const auto& shared = detail::shared_filler();

  for (auto group : kGroups) {
    const auto& own = detail::group_filler(group);
    for (int conv = 0; conv < cfg.conversations_per_group; ++conv) {
      const std::string conv_id = detail::conversation_name(group, conv);
      const long turns = rng.between(cfg.min_turns, cfg.max_turns);
      const bool predator_first = rng.bernoulli(0.5);

      std::vector<ChatMessage> messages;
      for (long t = 0; t < turns; ++t) {
        std::vector<std::string> words;
        const long len = rng.between(4, 9);
        for (long w = 0; w < len; ++w) {
          words.push_back(rng.bernoulli(0.35) ? rng.pick(own) : rng.pick(shared));
        }
        const bool predator = (t % 2 == 0) == predator_first;
        messages.push_back({conv_id, group, t, predator ? Speaker::Predator : Speaker::Other,
                            detail::join_words(words)});
      }

      auto contexts = build_contexts(messages, cfg.window_size);
      for (auto& ctx : contexts) {
        // Cue phrases are inserted as whole chunks so one cue never splits another.
        std::vector<std::vector<std::string>> chunks;
        for (const auto& m : ctx.messages) chunks.push_back(detail::split_words(m.text));
        StrategyVector sv;
        for (std::size_t s = 0; s < kNumStrategies; ++s) {
          if (!rng.bernoulli(cfg.strategy_density)) continue;
          const double value = rng.bernoulli(cfg.partial_probability) ? 0.5 : 1.0;
          sv.set(s, value);
          std::string phrase = rng.pick(cfg.strategy_cue_lexicons.at(std::string(kStrategySlugs[s])));
          if (value == 0.5) phrase = cfg.weak_prefix + " " + phrase;
          auto& target = chunks[rng.below(chunks.size())];
          const auto at = rng.below(target.size() + 1);
          target.insert(target.begin() + static_cast<std::ptrdiff_t>(at), std::move(phrase));
        }
        for (std::size_t k = 0; k < chunks.size(); ++k) {
          ctx.messages[k].text = detail::join_words(chunks[k]);
        }
        ctx.strategies = sv;
        out.push_back(std::move(ctx));
      }
    }
  }
  return out;
}

}  // namespace groomrisk
