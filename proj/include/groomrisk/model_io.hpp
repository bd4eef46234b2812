#pragma once

// Binary model container.
//
// Layout (all integers little-endian, doubles as IEEE-754 bit patterns):
//   8 bytes   magic "GRISKMDL"
//   u32       format version (currently 1)
//   u32       number of heads
//   per head:
//     u32 + bytes   head name (e.g. "pooled", "LEO")
//     u32 + bytes   JSON header: {"feature_spec", "train_meta"}
//     u64           weight count (must equal feature_spec dimension)
//     f64 * count   weights
//     f64           bias
//   8 bytes   trailer "ENDMODEL"
//
// Readers reject other major versions. Weights are stored bit-exactly.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include <json.hpp>

#include "groomrisk/error.hpp"
#include "groomrisk/regressor.hpp"

namespace groomrisk {

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr char kModelMagic[8] = {'G', 'R', 'I', 'S', 'K', 'M', 'D', 'L'};
inline constexpr char kModelTrailer[8] = {'E', 'N', 'D', 'M', 'O', 'D', 'E', 'L'};

/// Heads keyed by scope: "pooled" or a group name.
using ModelBundle = std::map<std::string, LinearModel>;

inline constexpr const char* kPooledHead = "pooled";

namespace detail {

template <typename UInt>
void write_le(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> buf{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(buf.data(), buf.size());
}

template <typename UInt>
UInt read_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(UInt)> buf{};
  in.read(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!in) throw DataError(std::string("model file truncated while reading ") + what);
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& out, double d) { write_le(out, std::bit_cast<std::uint64_t>(d)); }

inline double read_f64(std::istream& in, const char* what) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}

inline void write_blob(std::ostream& out, const std::string& s) {
  write_le(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_blob(std::istream& in, const char* what) {
  const auto n = read_le<std::uint32_t>(in, what);
  if (n > (1u << 30)) throw DataError(std::string("model file corrupt: oversized ") + what);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw DataError(std::string("model file truncated while reading ") + what);
  return s;
}

}  // namespace detail

inline void save_bundle(std::ostream& out, const ModelBundle& bundle) {
  if (bundle.empty()) throw ParameterError("model bundle has no heads");
  out.write(kModelMagic, sizeof kModelMagic);
  detail::write_le(out, kModelFormatVersion);
  detail::write_le(out, static_cast<std::uint32_t>(bundle.size()));
  for (const auto& [name, model] : bundle) {
    detail::write_blob(out, name);
    const nlohmann::json header = {{"feature_spec", model.feature_spec},
                                   {"train_meta", model.train_meta}};
    detail::write_blob(out, header.dump());
    detail::write_le(out, static_cast<std::uint64_t>(model.weights.size()));
    for (double w : model.weights) detail::write_f64(out, w);
    detail::write_f64(out, model.bias);
  }
  out.write(kModelTrailer, sizeof kModelTrailer);
  if (!out) throw DataError("failed writing model");
}

inline ModelBundle load_bundle(std::istream& in) {
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kModelMagic, sizeof magic) != 0) {
    throw DataError("not a model file (bad magic)");
  }
  const auto version = detail::read_le<std::uint32_t>(in, "version");
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version) +
                    " (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  const auto heads = detail::read_le<std::uint32_t>(in, "head count");
  if (heads == 0) throw DataError("model file has no heads");
  ModelBundle bundle;
  for (std::uint32_t h = 0; h < heads; ++h) {
    const auto name = detail::read_blob(in, "head name");
    const auto header_text = detail::read_blob(in, "header");
    LinearModel model;
    try {
      const auto header = nlohmann::json::parse(header_text);
      model.feature_spec = header.at("feature_spec").get<FeatureSpec>();
      model.train_meta = header.at("train_meta").get<TrainMeta>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("model header corrupt: ") + e.what());
    }
    const auto count = detail::read_le<std::uint64_t>(in, "weight count");
    if (count != model.feature_spec.dimension()) {
      throw DataError("model head '" + name + "' has " + std::to_string(count) +
                      " weights but its feature spec declares dimension " +
                      std::to_string(model.feature_spec.dimension()));
    }
    model.weights.resize(count);
    for (auto& w : model.weights) w = detail::read_f64(in, "weights");
    model.bias = detail::read_f64(in, "bias");
    if (!bundle.emplace(name, std::move(model)).second) {
      throw DataError("duplicate model head '" + name + "'");
    }
  }
  char trailer[8] = {};
  in.read(trailer, sizeof trailer);
  if (!in || std::memcmp(trailer, kModelTrailer, sizeof trailer) != 0) {
    throw DataError("model file truncated (missing trailer)");
  }
  return bundle;
}

inline void save_model(std::ostream& out, const LinearModel& model) {
  save_bundle(out, ModelBundle{{kPooledHead, model}});
}

/// Loads a single-head model file.
inline LinearModel load_model(std::istream& in) {
  auto bundle = load_bundle(in);
  if (bundle.size() != 1) {
    throw DataError("expected a single-head model, found " + std::to_string(bundle.size()) +
                    " heads");
  }
  return std::move(bundle.begin()->second);
}

}  // namespace groomrisk
