#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "boxplain/data.hpp"
#include "boxplain/model.hpp"

namespace boxplain {

enum class ProfileKind { PDP, ALE, CP };

std::string_view to_string(ProfileKind kind);

/// Model response over a strictly increasing numeric grid.
struct ProfileCurve {
  std::string label;
  std::string variable;
  ProfileKind kind = ProfileKind::PDP;
  Eigen::VectorXd grid;
  Eigen::VectorXd response;
};

inline constexpr std::size_t kDefaultPdpGrid = 21;
inline constexpr std::size_t kDefaultAleBins = 20;

/// Mean prediction over all validation rows with `variable` fixed at each
/// grid value. One predict call per grid value.
ProfileCurve partial_dependence(const Explainer& explainer, std::string_view variable,
                                const GridStrategy& strategy =
                                    GridStrategy::quantiles(kDefaultPdpGrid));

/// Accumulated local effects over quantile bins, centered so that the
/// bin-count-weighted mean of the bin midpoint effects is zero.
ProfileCurve accumulated_local_effects(const Explainer& explainer, std::string_view variable,
                                       std::size_t bins = kDefaultAleBins);

struct LevelStat {
  std::string level;
  std::size_t count = 0;
  double mean = 0.0;  // mean predicted response over rows at this level
};

struct MergeStep {
  std::vector<std::string> group_a;  // lower mean
  std::vector<std::string> group_b;
  double cost = 0.0;
  double cumulative_cost = 0.0;
};

struct MergingPath {
  std::string label;
  std::string variable;
  std::vector<LevelStat> levels;  // ascending by mean, ties by name
  std::vector<MergeStep> steps;
  std::size_t cut = 1;
  std::vector<std::vector<std::string>> groups;  // live groups after L - cut merges

  /// Groups left after the first `levels.size() - cut` merges, ordered by mean.
  std::vector<std::vector<std::string>> groups_at(std::size_t cut) const;
};

/// Default cut when none is given: min(3, L).
inline constexpr std::size_t kDefaultMergeCut = 3;

/// Ward-style agglomeration of categorical levels by mean predicted response,
/// merging only neighbours in mean order.
MergingPath factor_merge(const Explainer& explainer, std::string_view variable,
                         std::optional<std::size_t> cut = std::nullopt);

}  // namespace boxplain
