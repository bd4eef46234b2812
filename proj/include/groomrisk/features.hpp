#pragma once

// Feature vectors for the risk regressor: signed hashed word n-grams over
// the window text, or dense embeddings loaded from a line-delimited file.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "groomrisk/annotations.hpp"
#include "groomrisk/error.hpp"

namespace groomrisk {

/// Sparse (sorted, unique indices) or dense real vector of fixed dimension.
class FeatureVector {
 public:
  using Entry = std::pair<std::uint32_t, double>;

  FeatureVector() = default;

  static FeatureVector dense(std::vector<double> values) {
    if (values.empty()) throw ParameterError("dense feature vector needs dimension > 0");
    for (double v : values) {
      if (!std::isfinite(v)) throw ParameterError("feature values must be finite");
    }
    FeatureVector fv;
    fv.dimension_ = values.size();
    fv.dense_ = std::move(values);
    fv.is_dense_ = true;
    return fv;
  }

  /// Entries may be unsorted and repeat indices; repeats are summed, zeros dropped.
  static FeatureVector sparse(std::size_t dimension, std::vector<Entry> entries) {
    if (dimension == 0) throw ParameterError("sparse feature vector needs dimension > 0");
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.first < b.first; });
    std::vector<Entry> merged;
    for (const auto& e : entries) {
      if (e.first >= dimension) throw ParameterError("sparse index out of range");
      if (!std::isfinite(e.second)) throw ParameterError("feature values must be finite");
      if (!merged.empty() && merged.back().first == e.first) {
        merged.back().second += e.second;
      } else {
        merged.push_back(e);
      }
    }
    std::erase_if(merged, [](const Entry& e) { return e.second == 0.0; });
    FeatureVector fv;
    fv.dimension_ = dimension;
    fv.sparse_ = std::move(merged);
    return fv;
  }

  std::size_t dimension() const { return dimension_; }
  bool is_dense() const { return is_dense_; }
  const std::vector<double>& dense_values() const { return dense_; }
  const std::vector<Entry>& sparse_entries() const { return sparse_; }

  /// Calls fn(index, value) for every stored (possibly zero, if dense) component
  /// in increasing index order.
  template <typename Fn>
  void for_each(Fn&& fn) const {
    if (is_dense_) {
      for (std::size_t i = 0; i < dense_.size(); ++i) fn(i, dense_[i]);
    } else {
      for (const auto& [i, v] : sparse_) fn(static_cast<std::size_t>(i), v);
    }
  }

  double dot(std::span<const double> weights) const {
    double acc = 0.0;
    for_each([&](std::size_t i, double v) { acc += weights[i] * v; });
    return acc;
  }

  double at(std::size_t i) const {
    if (is_dense_) return dense_.at(i);
    auto it = std::lower_bound(sparse_.begin(), sparse_.end(), i,
                               [](const Entry& e, std::size_t idx) { return e.first < idx; });
    return (it != sparse_.end() && it->first == i) ? it->second : 0.0;
  }

  bool operator==(const FeatureVector&) const = default;

 private:
  std::size_t dimension_ = 0;
  bool is_dense_ = false;
  std::vector<double> dense_;
  std::vector<Entry> sparse_;
};

inline constexpr std::size_t kDefaultHashDimension = std::size_t{1} << 18;

struct HashSpec {
  std::vector<int> ngram_orders = {1, 2};
  std::size_t dimension = kDefaultHashDimension;
  std::uint64_t seed = 0;

  bool operator==(const HashSpec&) const = default;
};

struct EmbeddingSpec {
  std::size_t dimension = 0;

  bool operator==(const EmbeddingSpec&) const = default;
};

/// Declares the feature space a model lives in.
struct FeatureSpec {
  std::variant<HashSpec, EmbeddingSpec> kind = HashSpec{};

  bool is_hash() const { return std::holds_alternative<HashSpec>(kind); }
  std::size_t dimension() const {
    return std::visit([](const auto& k) { return k.dimension; }, kind);
  }

  void validate() const {
    if (dimension() == 0) throw ParameterError("feature dimension must be > 0");
    if (dimension() > std::size_t{1} << 32) throw ParameterError("feature dimension too large");
    if (const auto* h = std::get_if<HashSpec>(&kind)) {
      if (h->ngram_orders.empty()) throw ParameterError("at least one n-gram order required");
      for (int n : h->ngram_orders) {
        if (n < 1) throw ParameterError("n-gram orders must be >= 1");
      }
    }
  }

  bool operator==(const FeatureSpec&) const = default;
};

inline void to_json(nlohmann::json& j, const FeatureSpec& s) {
  if (const auto* h = std::get_if<HashSpec>(&s.kind)) {
    j = {{"type", "hash"},
         {"ngram_orders", h->ngram_orders},
         {"dimension", h->dimension},
         {"seed", h->seed}};
  } else {
    j = {{"type", "embeddings"}, {"dimension", std::get<EmbeddingSpec>(s.kind).dimension}};
  }
}

inline void from_json(const nlohmann::json& j, FeatureSpec& s) {
  const auto type = j.value("type", std::string("hash"));
  if (type == "hash") {
    HashSpec h = s.is_hash() ? std::get<HashSpec>(s.kind) : HashSpec{};
    if (j.contains("ngram_orders")) h.ngram_orders = j.at("ngram_orders").get<std::vector<int>>();
    if (j.contains("dimension")) h.dimension = j.at("dimension").get<std::size_t>();
    if (j.contains("seed")) h.seed = j.at("seed").get<std::uint64_t>();
    s.kind = h;
  } else if (type == "embeddings") {
    s.kind = EmbeddingSpec{j.value("dimension", std::size_t{0})};
  } else {
    throw ParameterError("unknown feature type '" + type + "' (expected hash or embeddings)");
  }
}

/// 64-bit FNV-1a. A non-zero seed is folded into the offset basis.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Lowercased (ASCII) whitespace tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

/// Signed feature hashing of word n-grams. Each n-gram (tokens joined by a
/// single space) is hashed; index = hash mod dimension, sign = top bit.
inline FeatureVector hash_features(std::string_view text, const HashSpec& spec) {
  const auto tokens = tokenize(text);
  std::vector<FeatureVector::Entry> entries;
  std::string gram;
  for (int n : spec.ngram_orders) {
    const auto order = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + order <= tokens.size(); ++i) {
      gram.clear();
      for (std::size_t k = 0; k < order; ++k) {
        if (k) gram += ' ';
        gram += tokens[i + k];
      }
      const std::uint64_t h = fnv1a64(gram, spec.seed);
      const auto index = static_cast<std::uint32_t>(h % spec.dimension);
      entries.emplace_back(index, (h >> 63) ? -1.0 : 1.0);
    }
  }
  return FeatureVector::sparse(spec.dimension, std::move(entries));
}

inline FeatureVector extract_features(const ChatContext& context, const HashSpec& spec) {
  return hash_features(window_text(context), spec);
}

using EmbeddingTable = std::map<std::string, FeatureVector>;

/// Reads {"context_id": ..., "vector": [...]} lines. All vectors must share one dimension.
inline EmbeddingTable load_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::size_t dim = 0;
  detail::for_each_record(in, [&](const nlohmann::json& rec, std::size_t line) {
    const auto id = detail::require_string(rec, "context_id", line);
    const auto& vec = detail::require_field(rec, "vector", line);
    if (!vec.is_array() || vec.empty()) throw DataError("field 'vector' must be a non-empty array", line);
    std::vector<double> values;
    values.reserve(vec.size());
    for (const auto& x : vec) {
      if (!x.is_number()) throw DataError("vector entries must be numbers", line);
      const double v = x.get<double>();
      if (!std::isfinite(v)) throw DataError("non-finite vector entry", line);
      values.push_back(v);
    }
    if (dim == 0) {
      dim = values.size();
    } else if (values.size() != dim) {
      throw DataError("dimension mismatch at line " + std::to_string(line) + " (expected " +
                          std::to_string(dim) + ", got " + std::to_string(values.size()) + ")",
                      line);
    }
    if (table.contains(id)) throw DataError("duplicate context_id '" + id + "'", line);
    table.emplace(id, FeatureVector::dense(std::move(values)));
  });
  return table;
}

/// Features for every context under `spec`. Embedding specs look vectors up in
/// `embeddings`; ids without a vector are reported together in one DataError.
inline std::vector<FeatureVector> featurize(std::span<const ChatContext> contexts,
                                            const FeatureSpec& spec,
                                            const EmbeddingTable* embeddings = nullptr) {
  spec.validate();
  std::vector<FeatureVector> out;
  out.reserve(contexts.size());
  if (const auto* h = std::get_if<HashSpec>(&spec.kind)) {
    for (const auto& c : contexts) out.push_back(extract_features(c, *h));
    return out;
  }
  if (embeddings == nullptr) throw ParameterError("embedding features require an embedding table");
  std::vector<std::string> missing;
  for (const auto& c : contexts) {
    auto it = embeddings->find(c.context_id);
    if (it == embeddings->end()) {
      missing.push_back(c.context_id);
      continue;
    }
    if (it->second.dimension() != spec.dimension()) {
      throw DataError("embedding for '" + c.context_id + "' has dimension " +
                      std::to_string(it->second.dimension()) + ", model expects " +
                      std::to_string(spec.dimension()));
    }
    out.push_back(it->second);
  }
  if (!missing.empty()) {
    std::string msg = "missing embeddings for " + std::to_string(missing.size()) + " context(s):";
    for (const auto& id : missing) msg += " " + id;
    throw DataError(msg);
  }
  return out;
}

}  // namespace groomrisk
