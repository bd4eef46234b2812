#pragma once

// Gaussian membership functions over aggregated risk scores, hedges, and
// crisp defuzzification into the three ordered risk categories.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "groomrisk/error.hpp"

namespace groomrisk {

/// Number of annotated strategies; an aggregated score lies in [0, kNumStrategies].
inline constexpr int kNumStrategies = 12;

/// Ordered Moderate < Significant < Severe. The numeric values are used as
/// array indices and for "higher risk wins" tie-breaking.
enum class RiskCategory : int { Moderate = 0, Significant = 1, Severe = 2 };

inline constexpr std::array<RiskCategory, 3> kCategories = {
    RiskCategory::Moderate, RiskCategory::Significant, RiskCategory::Severe};

inline std::string_view to_string(RiskCategory c) {
  switch (c) {
    case RiskCategory::Moderate: return "Moderate";
    case RiskCategory::Significant: return "Significant";
    case RiskCategory::Severe: return "Severe";
  }
  return "?";
}

inline RiskCategory category_from_string(std::string_view s) {
  for (auto c : kCategories) {
    if (to_string(c) == s) return c;
  }
  throw DataError("unknown risk category '" + std::string(s) + "'");
}

enum class MembershipMode { LiteralPdf, Normalized, NormalizedShoulder };
enum class DefuzzMode { Argmax, AlphaHighest };

inline std::string_view to_string(MembershipMode m) {
  switch (m) {
    case MembershipMode::LiteralPdf: return "literal-pdf";
    case MembershipMode::Normalized: return "normalized";
    case MembershipMode::NormalizedShoulder: return "normalized-shoulder";
  }
  return "?";
}

inline std::string_view to_string(DefuzzMode m) {
  return m == DefuzzMode::Argmax ? "argmax" : "alpha-highest";
}

inline MembershipMode membership_mode_from_string(std::string_view s) {
  for (auto m : {MembershipMode::LiteralPdf, MembershipMode::Normalized,
                 MembershipMode::NormalizedShoulder}) {
    if (to_string(m) == s) return m;
  }
  throw ParameterError("unknown membership mode '" + std::string(s) +
                       "' (expected literal-pdf, normalized or normalized-shoulder)");
}

inline DefuzzMode defuzz_mode_from_string(std::string_view s) {
  if (s == "argmax") return DefuzzMode::Argmax;
  if (s == "alpha-highest") return DefuzzMode::AlphaHighest;
  throw ParameterError("unknown defuzz mode '" + std::string(s) +
                       "' (expected argmax or alpha-highest)");
}

/// Degrees of membership in each category. Fuzzy: the components need not sum to 1.
struct MembershipVector {
  double moderate = 0.0;
  double significant = 0.0;
  double severe = 0.0;

  double operator[](RiskCategory c) const {
    switch (c) {
      case RiskCategory::Moderate: return moderate;
      case RiskCategory::Significant: return significant;
      case RiskCategory::Severe: return severe;
    }
    return 0.0;
  }

  bool operator==(const MembershipVector&) const = default;
};

struct FuzzyConfig {
  std::array<double, 3> means = {0.2, 1.0, 2.0};
  double sigma = 1.0;
  std::array<double, 3> hedge_exponents = {0.2, 1.0, 2.0};
  double alpha = 0.5;
  MembershipMode membership_mode = MembershipMode::NormalizedShoulder;
  DefuzzMode defuzz_mode = DefuzzMode::Argmax;

  bool operator==(const FuzzyConfig&) const = default;

  void validate() const {
    if (!(means[0] < means[1] && means[1] < means[2])) {
      throw ParameterError("means must be strictly increasing");
    }
    for (double m : means) {
      if (!std::isfinite(m)) throw ParameterError("means must be finite");
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be > 0");
    for (double h : hedge_exponents) {
      if (!(h > 0.0) || !std::isfinite(h)) throw ParameterError("hedge exponents must be > 0");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must be in (0,1]");
  }
};

inline void to_json(nlohmann::json& j, const FuzzyConfig& c) {
  j = nlohmann::json{{"means", c.means},
                     {"sigma", c.sigma},
                     {"hedge_exponents", c.hedge_exponents},
                     {"alpha", c.alpha},
                     {"membership_mode", std::string(to_string(c.membership_mode))},
                     {"defuzz_mode", std::string(to_string(c.defuzz_mode))}};
}

/// Partial documents are allowed: absent keys keep their current values.
inline void from_json(const nlohmann::json& j, FuzzyConfig& c) {
  if (j.contains("means")) c.means = j.at("means").get<std::array<double, 3>>();
  if (j.contains("sigma")) c.sigma = j.at("sigma").get<double>();
  if (j.contains("hedge_exponents")) {
    c.hedge_exponents = j.at("hedge_exponents").get<std::array<double, 3>>();
  }
  if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
  if (j.contains("membership_mode")) {
    c.membership_mode = membership_mode_from_string(j.at("membership_mode").get<std::string>());
  }
  if (j.contains("defuzz_mode")) {
    c.defuzz_mode = defuzz_mode_from_string(j.at("defuzz_mode").get<std::string>());
  }
}

/// Standard-normal density, e^(-z^2/2) / sqrt(2 pi).
inline double standard_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Membership of `score` in a Gaussian set centred at `mean`, raised to `hedge`.
///
/// literal-pdf uses the standard-normal density itself, so its peak is
/// 1/sqrt(2 pi) ~= 0.39894. The normalized modes drop that factor and peak at 1.
/// A standalone call in normalized-shoulder mode has no category position and
/// behaves exactly like normalized; the shoulders are applied by membership_vector.
inline double gaussian_membership(double score, double mean, double sigma, double hedge,
                                  MembershipMode mode) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be > 0");
  if (!(hedge > 0.0) || !std::isfinite(hedge)) throw ParameterError("hedge must be > 0");
  const double z = (score - mean) / sigma;
  if (mode == MembershipMode::LiteralPdf) {
    return std::pow(standard_normal_pdf(z), hedge);
  }
  // [e^(-z^2/2)]^hedge
  return std::exp(-0.5 * hedge * z * z);
}

inline MembershipVector membership_vector(double score, const FuzzyConfig& config) {
  config.validate();
  if (!std::isfinite(score)) throw ParameterError("risk score must be finite");
  std::array<double, 3> mu{};
  for (int k = 0; k < 3; ++k) {
    mu[k] = gaussian_membership(score, config.means[k], config.sigma,
                                config.hedge_exponents[k], config.membership_mode);
  }
  if (config.membership_mode == MembershipMode::NormalizedShoulder) {
    if (score <= config.means[0]) mu[0] = 1.0;
    if (score >= config.means[2]) mu[2] = 1.0;
  }
  return {mu[0], mu[1], mu[2]};
}

namespace detail {

// Highest category with maximal membership.
inline RiskCategory argmax_category(const MembershipVector& mv) {
  RiskCategory best = RiskCategory::Moderate;
  for (auto c : kCategories) {
    if (mv[c] >= mv[best]) best = c;
  }
  return best;
}

}  // namespace detail

inline RiskCategory defuzzify(const MembershipVector& mv, const FuzzyConfig& config) {
  if (config.defuzz_mode == DefuzzMode::AlphaHighest) {
    for (auto it = kCategories.rbegin(); it != kCategories.rend(); ++it) {
      if (mv[*it] >= config.alpha) return *it;
    }
    // Nothing reaches the cut: fall back to argmax.
  }
  return detail::argmax_category(mv);
}

/// Convenience: defuzzify(membership_vector(score)).
inline RiskCategory categorize(double score, const FuzzyConfig& config) {
  return defuzzify(membership_vector(score, config), config);
}

struct CategoryBoundary {
  double score;
  RiskCategory from;
  RiskCategory to;
};

/// Scores in [0, 12] at which the crisp category changes. Located by a dense
/// grid scan (step 1e-4) and refined by bisection to 1e-6.
inline std::vector<CategoryBoundary> category_boundaries(const FuzzyConfig& config) {
  config.validate();
  constexpr double kLo = 0.0;
  constexpr double kHi = static_cast<double>(kNumStrategies);
  constexpr double kStep = 1e-4;
  constexpr double kTol = 1e-6;
  const long steps = std::lround((kHi - kLo) / kStep);

  std::vector<CategoryBoundary> out;
  double prev_score = kLo;
  RiskCategory prev = categorize(prev_score, config);
  for (long i = 1; i <= steps; ++i) {
    const double s = kLo + static_cast<double>(i) * kStep;
    const RiskCategory cur = categorize(s, config);
    if (cur != prev) {
      double a = prev_score;
      double b = s;
      while (b - a > kTol) {
        const double mid = 0.5 * (a + b);
        if (categorize(mid, config) == prev) {
          a = mid;
        } else {
          b = mid;
        }
      }
      out.push_back({0.5 * (a + b), prev, cur});
    }
    prev = cur;
    prev_score = s;
  }
  return out;
}

}  // namespace groomrisk
