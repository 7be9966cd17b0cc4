#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "boxplain/model.hpp"
#include "boxplain/performance.hpp"

namespace boxplain {

struct ImportanceRow {
  std::string variable;
  double permuted_mean = 0.0;
  std::vector<double> permuted;  // one loss per repeat
  double drop = 0.0;             // permuted_mean - baseline, may be negative
};

struct ImportanceResult {
  std::string label;
  LossKind loss = LossKind::RMSE;
  double baseline = 0.0;
  std::vector<ImportanceRow> rows;  // ascending by variable name
  double all_shuffled = 0.0;        // mean over repeats, every column shuffled
  std::size_t repeats = 1;
  std::uint64_t seed = 0;
};

/// Permutation stream for one (variable, repeat); adding repeats leaves
/// earlier streams unchanged.
std::uint64_t permutation_seed(std::uint64_t seed, std::string_view variable,
                               std::size_t repeat);

/// Loss after shuffling each variable, against the intact-data baseline.
ImportanceResult variable_importance(const Explainer& explainer, LossKind loss_kind,
                                     std::size_t repeats, std::uint64_t seed,
                                     const std::optional<std::vector<std::string>>& variables =
                                         std::nullopt);

struct ImportanceOverlayRow {
  std::string label;
  std::string variable;
  double baseline;
  double permuted_mean;
};

/// Rows grouped by variable, variables ordered by the first result's drop
/// (descending, ties by name); within a variable, results keep input order.
std::vector<ImportanceOverlayRow> compare_importance(
    const std::vector<ImportanceResult>& results);

}  // namespace boxplain
