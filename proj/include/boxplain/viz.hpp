#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "boxplain/json.hpp"
#include "boxplain/local_explainers.hpp"
#include "boxplain/performance.hpp"
#include "boxplain/variable_importance.hpp"
#include "boxplain/variable_response.hpp"

namespace boxplain {

/// Any explainer output that can be exported or drawn.
using ExplainerResult = std::variant<PerformanceResult, ProfileCurve, MergingPath,
                                     ImportanceResult, CPProfile, Attribution>;

/// "performance" | "pdp" | "ale" | "cp" | "factor_merge" | "importance" | "breakdown"
std::string result_kind(const ExplainerResult& result);
const std::string& result_label(const ExplainerResult& result);

Json to_json(const ExplainerResult& result);
/// Canonical JSON of one result.
std::string export_json(const ExplainerResult& result);
/// Canonical JSON array of several results, in order.
std::string export_json(const std::vector<ExplainerResult>& results);

struct Palette {
  /// Stroke color of the i-th model label; at most 10.
  static const std::string& label_color(std::size_t index);
  static constexpr std::size_t kMaxLabels = 10;
  static constexpr std::string_view kPositive = "#3b73b9";   // blue
  static constexpr std::string_view kNegative = "#f2c230";   // yellow
  static constexpr std::string_view kReference = "#a6a6a6";  // gray
  static constexpr std::string_view kRmse = "#d62728";       // red
};

struct RenderOptions {
  int width = 800;
  int height = 0;  // 0: chosen from the content
  std::string title;
  bool log_y = false;  // reverse-ECDF survival axis
};

struct ChartDocument {
  std::string svg;
  int width = 0;
  int height = 0;
  std::string digest;  // fnv1a64 of export_json(results)
};

/// Draws one or more same-kind results (distinct labels) in a single SVG 1.1
/// document. Output bytes depend only on the inputs.
ChartDocument render(const std::vector<ExplainerResult>& results,
                     const RenderOptions& options = {});

/// Tick positions at 1, 2 or 5 times a power of ten covering [lo, hi].
std::vector<double> nice_ticks(double lo, double hi, int target = 5);

}  // namespace boxplain
