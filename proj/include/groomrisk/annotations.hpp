#pragma once

// Annotated chat corpora: message and context records, strategy vectors,
// sliding-window context construction and risk aggregation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "groomrisk/error.hpp"
#include "groomrisk/fuzzy.hpp"

namespace groomrisk {

enum class Group { LEO = 0, Victim = 1, Decoy = 2 };
inline constexpr std::array<Group, 3> kGroups = {Group::LEO, Group::Victim, Group::Decoy};

inline std::string_view to_string(Group g) {
  switch (g) {
    case Group::LEO: return "LEO";
    case Group::Victim: return "Victim";
    case Group::Decoy: return "Decoy";
  }
  return "?";
}

inline std::optional<Group> group_from_string(std::string_view s) {
  for (auto g : kGroups) {
    if (to_string(g) == s) return g;
  }
  return std::nullopt;
}

enum class Speaker { Predator, Other };

inline std::string_view to_string(Speaker s) {
  return s == Speaker::Predator ? "predator" : "other";
}

inline std::optional<Speaker> speaker_from_string(std::string_view s) {
  if (s == "predator") return Speaker::Predator;
  if (s == "other") return Speaker::Other;
  return std::nullopt;
}

/// Canonical strategy slugs, in storage order.
inline constexpr std::array<std::string_view, kNumStrategies> kStrategySlugs = {
    "coercion",    "bragging",      "teaching",       "image_request",
    "neg_physique", "neg_family",   "compliments",    "reverse_power",
    "sexual_history", "willingness", "roleplay",      "secrecy"};

inline std::optional<std::size_t> strategy_index(std::string_view slug) {
  for (std::size_t i = 0; i < kStrategySlugs.size(); ++i) {
    if (kStrategySlugs[i] == slug) return i;
  }
  return std::nullopt;
}

inline bool is_strategy_value(double v) { return v == 0.0 || v == 0.5 || v == 1.0; }

/// Twelve fuzzy strategy memberships, each 0 (absent), 0.5 (partial) or 1 (full).
class StrategyVector {
 public:
  StrategyVector() { values_.fill(0.0); }

  explicit StrategyVector(const std::array<double, kNumStrategies>& values) : values_(values) {
    for (double v : values_) {
      if (!is_strategy_value(v)) throw ParameterError("value outside {0,0.5,1}");
    }
  }

  double operator[](std::size_t i) const { return values_.at(i); }

  void set(std::size_t i, double v) {
    if (!is_strategy_value(v)) throw ParameterError("value outside {0,0.5,1}");
    values_.at(i) = v;
  }

  void set(std::string_view slug, double v) {
    auto idx = strategy_index(slug);
    if (!idx) throw ParameterError("unknown strategy slug '" + std::string(slug) + "'");
    set(*idx, v);
  }

  const std::array<double, kNumStrategies>& values() const { return values_; }

  bool operator==(const StrategyVector&) const = default;

 private:
  std::array<double, kNumStrategies> values_;
};

/// Risk score of a context: the sum of its strategy memberships, in [0, 12].
inline double aggregate(const StrategyVector& sv) {
  double total = 0.0;
  for (double v : sv.values()) total += v;
  return total;
}

/// Fuzzy union (element-wise max) of per-message annotations.
inline StrategyVector combine_strategies(std::span<const StrategyVector> per_message) {
  if (per_message.empty()) throw ParameterError("combine_strategies needs at least one vector");
  std::array<double, kNumStrategies> out{};
  for (const auto& sv : per_message) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], sv[i]);
  }
  return StrategyVector(out);
}

struct ChatMessage {
  std::string conversation_id;
  Group group = Group::LEO;
  long turn_index = 0;
  Speaker speaker = Speaker::Other;
  std::string text;

  bool operator==(const ChatMessage&) const = default;
};

struct AnnotatedMessage {
  ChatMessage message;
  StrategyVector strategies;
  nlohmann::json extra = nlohmann::json::object();

  bool operator==(const AnnotatedMessage&) const = default;
};

inline constexpr int kDefaultWindow = 3;

/// The current message plus up to n-1 predecessors from the same conversation.
struct ChatContext {
  std::string context_id;
  std::string conversation_id;
  Group group = Group::LEO;
  long turn_index = 0;  // turn of the last ("current") message
  std::vector<ChatMessage> messages;
  int window_size = kDefaultWindow;
  StrategyVector strategies;
  // Unrecognised record fields, kept so a parse/serialize cycle is lossless.
  nlohmann::json extra = nlohmann::json::object();

  double risk_score() const { return aggregate(strategies); }

  bool operator==(const ChatContext&) const = default;
};

inline std::string make_context_id(std::string_view conversation_id, long turn_index) {
  return std::string(conversation_id) + ":" + std::to_string(turn_index);
}

/// Surface text seen by feature extractors: one "<speaker>: <text>" line per message.
inline std::string window_text(const ChatContext& ctx) {
  std::string out;
  for (std::size_t i = 0; i < ctx.messages.size(); ++i) {
    if (i) out += '\n';
    out += to_string(ctx.messages[i].speaker);
    out += ": ";
    out += ctx.messages[i].text;
  }
  return out;
}

/// One context per message; windows never cross a conversation boundary and
/// are truncated (not padded) near the start of a conversation. Strategies are
/// left empty.
inline std::vector<ChatContext> build_contexts(std::span<const ChatMessage> messages,
                                               int n = kDefaultWindow) {
  if (n < 1) throw ParameterError("window size n must be >= 1");
  std::vector<ChatContext> out;
  out.reserve(messages.size());
  std::size_t conv_start = 0;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& m = messages[i];
    if (i > 0) {
      const auto& prev = messages[i - 1];
      if (prev.conversation_id != m.conversation_id) {
        if (prev.conversation_id > m.conversation_id) {
          throw ParameterError("messages not sorted by conversation_id");
        }
        conv_start = i;
      } else if (m.turn_index <= prev.turn_index) {
        throw ParameterError("turn_index not strictly increasing in conversation '" +
                             m.conversation_id + "'");
      }
    }
    const std::size_t first = std::max(conv_start, i + 1 >= static_cast<std::size_t>(n)
                                                       ? i + 1 - static_cast<std::size_t>(n)
                                                       : std::size_t{0});
    ChatContext ctx;
    ctx.context_id = make_context_id(m.conversation_id, m.turn_index);
    ctx.conversation_id = m.conversation_id;
    ctx.group = m.group;
    ctx.turn_index = m.turn_index;
    ctx.window_size = n;
    ctx.messages.assign(messages.begin() + static_cast<std::ptrdiff_t>(first),
                        messages.begin() + static_cast<std::ptrdiff_t>(i + 1));
    out.push_back(std::move(ctx));
  }
  return out;
}

/// build_contexts over annotated messages, with each context's strategies the
/// fuzzy union of its window's annotations.
inline std::vector<ChatContext> contexts_from_messages(std::span<const AnnotatedMessage> annotated,
                                                       int n = kDefaultWindow) {
  std::vector<ChatMessage> plain;
  plain.reserve(annotated.size());
  for (const auto& a : annotated) plain.push_back(a.message);
  auto contexts = build_contexts(plain, n);

  for (std::size_t i = 0; i < annotated.size(); ++i) {
    const std::size_t len = contexts[i].messages.size();
    std::vector<StrategyVector> window;
    for (std::size_t k = i + 1 - len; k <= i; ++k) window.push_back(annotated[k].strategies);
    contexts[i].strategies = combine_strategies(window);
  }
  return contexts;
}

enum class CorpusSchema { ContextLevel, MessageLevel };

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& rec, const char* key,
                                           std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) throw DataError(std::string("missing field '") + key + "'", line);
  return *it;
}

inline std::string require_string(const nlohmann::json& rec, const char* key, std::size_t line) {
  const auto& v = require_field(rec, key, line);
  if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string", line);
  return v.get<std::string>();
}

inline long require_turn(const nlohmann::json& rec, std::size_t line) {
  const auto& v = require_field(rec, "turn_index", line);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw DataError("field 'turn_index' must be a non-negative integer", line);
  }
  return static_cast<long>(v.get<long long>());
}

inline Group require_group(const nlohmann::json& rec, std::size_t line) {
  const auto name = require_string(rec, "group", line);
  auto g = group_from_string(name);
  if (!g) throw DataError("unknown group '" + name + "' (expected LEO, Victim or Decoy)", line);
  return *g;
}

inline Speaker parse_speaker(const nlohmann::json& v, std::size_t line) {
  if (!v.is_string()) throw DataError("speaker must be a string", line);
  auto s = speaker_from_string(v.get<std::string>());
  if (!s) {
    throw DataError("unknown speaker '" + v.get<std::string>() + "' (expected predator or other)",
                    line);
  }
  return *s;
}

inline StrategyVector parse_strategies(const nlohmann::json& rec, std::size_t line) {
  const auto& obj = require_field(rec, "strategies", line);
  if (!obj.is_object()) throw DataError("field 'strategies' must be an object", line);
  StrategyVector sv;
  std::array<bool, kNumStrategies> seen{};
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    auto idx = strategy_index(it.key());
    if (!idx) throw DataError("unknown strategy slug '" + it.key() + "'", line);
    if (!it.value().is_number()) {
      throw DataError("strategies." + it.key() + ": value must be numeric", line);
    }
    const double v = it.value().get<double>();
    if (!is_strategy_value(v)) {
      throw DataError("strategies." + it.key() + ": value outside {0,0.5,1}", line);
    }
    sv.set(*idx, v);
    seen[*idx] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw DataError("strategies." + std::string(kStrategySlugs[i]) + ": missing", line);
  }
  return sv;
}

inline nlohmann::json strategies_to_json(const StrategyVector& sv) {
  nlohmann::json obj = nlohmann::json::object();
  for (std::size_t i = 0; i < kStrategySlugs.size(); ++i) {
    obj[std::string(kStrategySlugs[i])] = sv[i];
  }
  return obj;
}

inline nlohmann::json extra_fields(const nlohmann::json& rec,
                                   std::initializer_list<std::string_view> known) {
  nlohmann::json extra = nlohmann::json::object();
  for (auto it = rec.begin(); it != rec.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) extra[it.key()] = it.value();
  }
  return extra;
}

// Per-conversation consistency: constant group, strictly increasing turns.
class ConversationTracker {
 public:
  void check(const std::string& conversation_id, Group group, long turn, std::size_t line) {
    auto [it, inserted] = seen_.try_emplace(conversation_id, State{group, turn});
    if (inserted) return;
    if (it->second.group != group) {
      throw DataError("group changes within conversation '" + conversation_id + "'", line);
    }
    if (turn <= it->second.last_turn) {
      throw DataError("non-monotone turn_index " + std::to_string(turn) + " in conversation '" +
                          conversation_id + "'",
                      line);
    }
    it->second.last_turn = turn;
  }

 private:
  struct State {
    Group group;
    long last_turn;
  };
  std::map<std::string, State> seen_;
};

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    if (!rec.is_object()) throw DataError("record must be a JSON object", lineno);
    fn(rec, lineno);
  }
}

}  // namespace detail

/// Parses a context-level corpus (one JSON object per line).
inline std::vector<ChatContext> parse_context_corpus(std::istream& in) {
  std::vector<ChatContext> out;
  detail::ConversationTracker tracker;
  detail::for_each_record(in, [&](const nlohmann::json& rec, std::size_t line) {
    ChatContext ctx;
    ctx.context_id = detail::require_string(rec, "context_id", line);
    ctx.conversation_id = detail::require_string(rec, "conversation_id", line);
    ctx.group = detail::require_group(rec, line);
    ctx.turn_index = detail::require_turn(rec, line);
    tracker.check(ctx.conversation_id, ctx.group, ctx.turn_index, line);

    const auto& texts = detail::require_field(rec, "texts", line);
    const auto& speakers = detail::require_field(rec, "speakers", line);
    if (!texts.is_array() || texts.empty()) {
      throw DataError("field 'texts' must be a non-empty array", line);
    }
    if (!speakers.is_array() || speakers.size() != texts.size()) {
      throw DataError("field 'speakers' must match 'texts' in length", line);
    }
    if (auto it = rec.find("window_size"); it != rec.end()) {
      if (!it->is_number_integer() || it->get<int>() < 1) {
        throw DataError("field 'window_size' must be a positive integer", line);
      }
      ctx.window_size = it->get<int>();
    }
    if (texts.size() > static_cast<std::size_t>(ctx.window_size)) {
      throw DataError("context holds " + std::to_string(texts.size()) +
                          " messages, more than window size " + std::to_string(ctx.window_size),
                      line);
    }
    const long count = static_cast<long>(texts.size());
    if (ctx.turn_index + 1 < count) {
      throw DataError("context holds more messages than turns up to turn_index", line);
    }
    for (long k = 0; k < count; ++k) {
      const auto& t = texts[static_cast<std::size_t>(k)];
      if (!t.is_string()) throw DataError("texts must be strings", line);
      ChatMessage m;
      m.conversation_id = ctx.conversation_id;
      m.group = ctx.group;
      m.turn_index = ctx.turn_index - (count - 1 - k);
      m.speaker = detail::parse_speaker(speakers[static_cast<std::size_t>(k)], line);
      m.text = t.get<std::string>();
      ctx.messages.push_back(std::move(m));
    }
    ctx.strategies = detail::parse_strategies(rec, line);
    ctx.extra = detail::extra_fields(rec, {"context_id", "conversation_id", "group", "turn_index",
                                           "texts", "speakers", "strategies", "window_size"});
    out.push_back(std::move(ctx));
  });
  return out;
}

/// Parses a message-level corpus. Messages must appear in turn order within
/// each conversation.
inline std::vector<AnnotatedMessage> parse_message_corpus(std::istream& in) {
  std::vector<AnnotatedMessage> out;
  detail::ConversationTracker tracker;
  detail::for_each_record(in, [&](const nlohmann::json& rec, std::size_t line) {
    AnnotatedMessage a;
    a.message.conversation_id = detail::require_string(rec, "conversation_id", line);
    a.message.group = detail::require_group(rec, line);
    a.message.turn_index = detail::require_turn(rec, line);
    tracker.check(a.message.conversation_id, a.message.group, a.message.turn_index, line);
    a.message.speaker = detail::parse_speaker(detail::require_field(rec, "speaker", line), line);
    a.message.text = detail::require_string(rec, "text", line);
    a.strategies = detail::parse_strategies(rec, line);
    a.extra = detail::extra_fields(
        rec, {"conversation_id", "group", "turn_index", "speaker", "text", "strategies"});
    out.push_back(std::move(a));
  });
  return out;
}

/// Sniffs the schema from the first record: "texts" means context-level.
/// Returns nullopt for an empty stream. Leaves the stream rewound.
inline std::optional<CorpusSchema> detect_schema(std::istream& in) {
  const auto start = in.tellg();
  std::optional<CorpusSchema> schema;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    schema = rec.contains("texts") ? CorpusSchema::ContextLevel : CorpusSchema::MessageLevel;
    break;
  }
  in.clear();
  in.seekg(start);
  return schema;
}

/// Reads either schema and returns contexts (message-level input is windowed
/// with window size n and combined by fuzzy union).
inline std::vector<ChatContext> load_contexts(std::istream& in, int n = kDefaultWindow) {
  auto schema = detect_schema(in);
  if (!schema) return {};
  if (*schema == CorpusSchema::ContextLevel) return parse_context_corpus(in);
  auto messages = parse_message_corpus(in);
  std::stable_sort(messages.begin(), messages.end(), [](const auto& a, const auto& b) {
    return a.message.conversation_id < b.message.conversation_id;
  });
  return contexts_from_messages(messages, n);
}

inline nlohmann::json to_json_record(const ChatContext& ctx) {
  nlohmann::json rec = ctx.extra.is_object() ? ctx.extra : nlohmann::json::object();
  rec["context_id"] = ctx.context_id;
  rec["conversation_id"] = ctx.conversation_id;
  rec["group"] = std::string(to_string(ctx.group));
  rec["turn_index"] = ctx.turn_index;
  nlohmann::json texts = nlohmann::json::array();
  nlohmann::json speakers = nlohmann::json::array();
  for (const auto& m : ctx.messages) {
    texts.push_back(m.text);
    speakers.push_back(std::string(to_string(m.speaker)));
  }
  rec["texts"] = std::move(texts);
  rec["speakers"] = std::move(speakers);
  rec["strategies"] = detail::strategies_to_json(ctx.strategies);
  if (ctx.window_size != kDefaultWindow) rec["window_size"] = ctx.window_size;
  return rec;
}

inline nlohmann::json to_json_record(const AnnotatedMessage& a) {
  nlohmann::json rec = a.extra.is_object() ? a.extra : nlohmann::json::object();
  rec["conversation_id"] = a.message.conversation_id;
  rec["group"] = std::string(to_string(a.message.group));
  rec["turn_index"] = a.message.turn_index;
  rec["speaker"] = std::string(to_string(a.message.speaker));
  rec["text"] = a.message.text;
  rec["strategies"] = detail::strategies_to_json(a.strategies);
  return rec;
}

template <typename Record>
void write_corpus(std::ostream& out, std::span<const Record> records) {
  for (const auto& r : records) out << to_json_record(r).dump() << '\n';
}

}  // namespace groomrisk
