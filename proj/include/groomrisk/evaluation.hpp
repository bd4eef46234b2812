#pragma once

// Per-group, per-category error reports: hard-bucket the actual risk scores
// with the fuzzy categoriser, then tabulate MSE and the distribution of
// predictions in each (group, category) cell.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "groomrisk/annotations.hpp"
#include "groomrisk/error.hpp"
#include "groomrisk/features.hpp"
#include "groomrisk/fuzzy.hpp"

namespace groomrisk {

struct EvalInput {
  std::string context_id;
  Group group = Group::LEO;
  double r_groom = 0.0;
  double r_pred = 0.0;
};

struct EvalRecord {
  std::string context_id;
  Group group = Group::LEO;
  double r_groom = 0.0;
  double r_pred = 0.0;
  RiskCategory category = RiskCategory::Moderate;
};

/// Assigns each record the crisp category of its actual risk score.
inline std::vector<EvalRecord> bucket(std::span<const EvalInput> inputs, const FuzzyConfig& config) {
  config.validate();
  std::vector<EvalRecord> out;
  out.reserve(inputs.size());
  for (const auto& in : inputs) {
    if (!std::isfinite(in.r_groom) || !std::isfinite(in.r_pred)) {
      throw DataError("non-finite score for context '" + in.context_id + "'");
    }
    out.push_back({in.context_id, in.group, in.r_groom, in.r_pred, categorize(in.r_groom, config)});
  }
  return out;
}

struct DistributionStats {
  double mean = 0.0;
  double variance = 0.0;  // population variance
  double min = 0.0;
  double p25 = 0.0;
  double median = 0.0;
  double p75 = 0.0;
  double max = 0.0;

  bool operator==(const DistributionStats&) const = default;
};

/// Quantile by linear interpolation between order statistics at h = (n-1)q.
/// `sorted` must be non-empty and ascending.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline std::optional<DistributionStats> describe(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return DistributionStats{mean,
                           ss / n,
                           values.front(),
                           quantile_sorted(values, 0.25),
                           quantile_sorted(values, 0.5),
                           quantile_sorted(values, 0.75),
                           values.back()};
}

/// One (group, category) cell. Empty cells have count 0 and no MSE/stats.
struct CellStats {
  std::size_t count = 0;
  std::optional<double> mse;
  std::optional<DistributionStats> distribution;

  bool operator==(const CellStats&) const = default;
};

struct GroupSummary {
  std::size_t count = 0;
  std::optional<double> mse;

  bool operator==(const GroupSummary&) const = default;
};

struct EvalReport {
  nlohmann::json config;  // echo of the configuration that produced the report
  std::string input_hash;
  std::array<std::array<CellStats, 3>, 3> cells{};  // [group][category]
  std::array<GroupSummary, 3> overall{};            // [group]

  const CellStats& cell(Group g, RiskCategory c) const {
    return cells[static_cast<std::size_t>(g)][static_cast<std::size_t>(c)];
  }
  const GroupSummary& group(Group g) const { return overall[static_cast<std::size_t>(g)]; }

  bool operator==(const EvalReport&) const = default;
};

namespace detail {

// Records in canonical order so every reduction is independent of input order.
inline std::vector<EvalRecord> canonical_order(std::span<const EvalRecord> records) {
  std::vector<EvalRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(), [](const EvalRecord& a, const EvalRecord& b) {
    return std::tuple(a.context_id, static_cast<int>(a.group), a.r_groom, a.r_pred) <
           std::tuple(b.context_id, static_cast<int>(b.group), b.r_groom, b.r_pred);
  });
  return sorted;
}

}  // namespace detail

/// Content hash (FNV-1a, hex) of the record set, independent of input order.
inline std::string records_hash(std::span<const EvalRecord> records) {
  std::string canon;
  for (const auto& r : detail::canonical_order(records)) {
    canon += r.context_id;
    canon += '\0';
    canon += to_string(r.group);
    canon += '\0';
    for (double d : {r.r_groom, r.r_pred}) {
      const auto bits = std::bit_cast<std::uint64_t>(d);
      for (int i = 0; i < 8; ++i) canon += static_cast<char>((bits >> (8 * i)) & 0xFF);
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canon)));
  return buf;
}

/// Fills count and MSE for every cell and every group's pooled row.
inline void per_category_mse(std::span<const EvalRecord> records, EvalReport& report) {
  std::array<std::array<double, 3>, 3> sq{};
  std::array<double, 3> group_sq{};
  for (auto& row : report.cells) {
    for (auto& c : row) {
      c.count = 0;
      c.mse.reset();
    }
  }
  report.overall = {};
  for (const auto& r : detail::canonical_order(records)) {
    const auto g = static_cast<std::size_t>(r.group);
    const auto c = static_cast<std::size_t>(r.category);
    const double e = (r.r_pred - r.r_groom) * (r.r_pred - r.r_groom);
    sq[g][c] += e;
    group_sq[g] += e;
    ++report.cells[g][c].count;
    ++report.overall[g].count;
  }
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t c = 0; c < 3; ++c) {
      auto& cell = report.cells[g][c];
      if (cell.count > 0) cell.mse = sq[g][c] / static_cast<double>(cell.count);
    }
    if (report.overall[g].count > 0) {
      report.overall[g].mse = group_sq[g] / static_cast<double>(report.overall[g].count);
    }
  }
}

/// Fills the prediction distribution of every cell.
inline void distribution_stats(std::span<const EvalRecord> records, EvalReport& report) {
  std::array<std::array<std::vector<double>, 3>, 3> preds;
  for (const auto& r : detail::canonical_order(records)) {
    preds[static_cast<std::size_t>(r.group)][static_cast<std::size_t>(r.category)].push_back(
        r.r_pred);
  }
  for (std::size_t g = 0; g < 3; ++g) {
    for (std::size_t c = 0; c < 3; ++c) {
      report.cells[g][c].distribution = describe(std::move(preds[g][c]));
    }
  }
}

inline EvalReport make_report(std::span<const EvalRecord> records, nlohmann::json config_echo) {
  EvalReport report;
  report.config = std::move(config_echo);
  report.input_hash = records_hash(records);
  per_category_mse(records, report);
  distribution_stats(records, report);
  return report;
}

/// Coefficient of determination 1 - SS_res / SS_tot.
inline double r_squared(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size() || actual.empty()) {
    throw ParameterError("r_squared needs two equal-length non-empty series");
  }
  double mean = 0.0;
  for (double y : actual) mean += y;
  mean /= static_cast<double>(actual.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    ss_tot += (actual[i] - mean) * (actual[i] - mean);
  }
  if (ss_tot == 0.0) throw ParameterError("r_squared undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------
// Serialisation

enum class ReportFormat { TableText, Csv, Json };

inline ReportFormat report_format_from_string(std::string_view s) {
  if (s == "table-text") return ReportFormat::TableText;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "json") return ReportFormat::Json;
  throw ParameterError("unknown report format '" + std::string(s) +
                       "' (expected table-text, csv or json)");
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json groups = nlohmann::json::object();
  for (auto g : kGroups) {
    nlohmann::json cats = nlohmann::json::object();
    for (auto c : kCategories) {
      const auto& cell = report.cell(g, c);
      nlohmann::json dist = nullptr;
      if (cell.distribution) {
        const auto& d = *cell.distribution;
        dist = {{"mean", d.mean},     {"variance", d.variance}, {"min", d.min}, {"p25", d.p25},
                {"median", d.median}, {"p75", d.p75},           {"max", d.max}};
      }
      cats[std::string(to_string(c))] = {
          {"count", cell.count}, {"mse", opt(cell.mse)}, {"distribution", dist}};
    }
    groups[std::string(to_string(g))] = {{"count", report.group(g).count},
                                         {"mse", opt(report.group(g).mse)},
                                         {"categories", cats}};
  }
  return {{"config", report.config}, {"input_hash", report.input_hash}, {"groups", groups}};
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  auto opt = [](const nlohmann::json& v) -> std::optional<double> {
    if (v.is_null()) return std::nullopt;
    return v.get<double>();
  };
  EvalReport report;
  report.config = j.at("config");
  report.input_hash = j.at("input_hash").get<std::string>();
  for (auto g : kGroups) {
    const auto& gj = j.at("groups").at(std::string(to_string(g)));
    auto& summary = report.overall[static_cast<std::size_t>(g)];
    summary.count = gj.at("count").get<std::size_t>();
    summary.mse = opt(gj.at("mse"));
    for (auto c : kCategories) {
      const auto& cj = gj.at("categories").at(std::string(to_string(c)));
      auto& cell = report.cells[static_cast<std::size_t>(g)][static_cast<std::size_t>(c)];
      cell.count = cj.at("count").get<std::size_t>();
      cell.mse = opt(cj.at("mse"));
      const auto& dj = cj.at("distribution");
      if (!dj.is_null()) {
        cell.distribution = DistributionStats{
            dj.at("mean").get<double>(), dj.at("variance").get<double>(),
            dj.at("min").get<double>(),  dj.at("p25").get<double>(),
            dj.at("median").get<double>(), dj.at("p75").get<double>(),
            dj.at("max").get<double>()};
      }
    }
  }
  return report;
}

namespace detail {

inline std::string fmt_fixed(const std::optional<double>& v, int precision) {
  if (!v) return "absent";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, *v);
  return buf;
}

inline std::string fmt_exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace detail

inline std::string emit_table_text(const EvalReport& report) {
  using detail::pad;
  std::ostringstream out;
  out << "# groomrisk evaluation report\n";
  out << "# input_hash: " << report.input_hash << "\n";
  out << "# config: " << report.config.dump() << "\n\n";

  constexpr std::size_t kLabel = 16;
  constexpr std::size_t kCol = 12;
  auto header = [&](std::string_view title) {
    out << title << "\n" << pad("Grooming Risk", kLabel);
    for (auto g : kGroups) out << pad(std::string(to_string(g)), kCol);
    out << "\n";
  };

  header("Mean squared error");
  for (auto c : kCategories) {
    out << pad(std::string(to_string(c)), kLabel);
    for (auto g : kGroups) out << pad(detail::fmt_fixed(report.cell(g, c).mse, 3), kCol);
    out << "\n";
  }
  out << pad("Overall", kLabel);
  for (auto g : kGroups) out << pad(detail::fmt_fixed(report.group(g).mse, 3), kCol);
  out << "\n\n";

  header("Count");
  for (auto c : kCategories) {
    out << pad(std::string(to_string(c)), kLabel);
    for (auto g : kGroups) out << pad(std::to_string(report.cell(g, c).count), kCol);
    out << "\n";
  }
  out << pad("Overall", kLabel);
  for (auto g : kGroups) out << pad(std::to_string(report.group(g).count), kCol);
  out << "\n\n";

  out << "Predicted risk distribution\n";
  out << pad("Group", 8) << pad("Category", 13) << pad("count", 8);
  for (const char* h : {"mean", "variance", "min", "p25", "median", "p75", "max"}) {
    out << pad(h, 10);
  }
  out << "\n";
  for (auto g : kGroups) {
    for (auto c : kCategories) {
      const auto& cell = report.cell(g, c);
      out << pad(std::string(to_string(g)), 8) << pad(std::string(to_string(c)), 13)
          << pad(std::to_string(cell.count), 8);
      if (cell.distribution) {
        const auto& d = *cell.distribution;
        for (double v : {d.mean, d.variance, d.min, d.p25, d.median, d.p75, d.max}) {
          out << pad(detail::fmt_fixed(v, 3), 10);
        }
      } else {
        out << "absent";
      }
      // Trailing blanks are trimmed below.
      out << "\n";
    }
  }
  std::string text = out.str();
  std::string trimmed;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    line.erase(line.find_last_not_of(' ') + 1);
    trimmed += line;
    trimmed += '\n';
  }
  return trimmed;
}

inline std::string emit_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "# input_hash: " << report.input_hash << "\n";
  out << "# config: " << report.config.dump() << "\n";
  out << "group,category,count,mse,mean,variance,min,p25,median,p75,max\n";
  auto opt = [](const std::optional<double>& v) { return v ? detail::fmt_exact(*v) : std::string(); };
  for (auto g : kGroups) {
    for (auto c : kCategories) {
      const auto& cell = report.cell(g, c);
      out << to_string(g) << ',' << to_string(c) << ',' << cell.count << ',' << opt(cell.mse);
      if (cell.distribution) {
        const auto& d = *cell.distribution;
        for (double v : {d.mean, d.variance, d.min, d.p25, d.median, d.p75, d.max}) {
          out << ',' << detail::fmt_exact(v);
        }
      } else {
        out << ",,,,,,,";
      }
      out << "\n";
    }
  }
  for (auto g : kGroups) {
    out << to_string(g) << ",Overall," << report.group(g).count << ',' << opt(report.group(g).mse)
        << ",,,,,,,\n";
  }
  return out.str();
}

inline std::string emit_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::TableText: return emit_table_text(report);
    case ReportFormat::Csv: return emit_csv(report);
    case ReportFormat::Json: return report_to_json(report).dump(2) + "\n";
  }
  throw ParameterError("unknown report format");
}

inline std::string emit_report(const EvalReport& report, std::string_view format) {
  return emit_report(report, report_format_from_string(format));
}

}  // namespace groomrisk
