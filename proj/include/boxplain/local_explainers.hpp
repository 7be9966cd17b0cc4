#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "boxplain/data.hpp"
#include "boxplain/model.hpp"
#include "boxplain/variable_response.hpp"

namespace boxplain {

// ---------------------------------------------------------------------------
// Ceteris paribus

/// One variable's what-if curve. Numeric variables fill `curve`; categorical
/// ones fill `levels` with responses in `curve.response`.
struct CPCurve {
  ProfileCurve curve;                   // kind CP; grid empty for categorical
  std::vector<std::string> levels;      // categorical grid
  Cell observed;                        // the observation's own value
  std::optional<Eigen::VectorXd> normalized;  // ECDF position of each grid value
};

struct CPProfile {
  std::string label;
  Observation observation;
  double prediction = 0.0;  // model prediction at the unmodified observation
  std::vector<CPCurve> curves;
};

/// For each variable, predictions at the observation with only that variable
/// swept over the grid. The observation's own value is always on the grid.
/// Categorical variables use their sorted levels.
CPProfile ceteris_paribus(const Explainer& explainer, const Observation& observation,
                          const std::optional<std::vector<std::string>>& variables =
                              std::nullopt,
                          const GridStrategy& strategy =
                              GridStrategy::quantiles(kDefaultPdpGrid));

/// Adds ECDF-normalized grid positions to every numeric curve.
CPProfile normalize_cp(CPProfile profile, const Explainer& explainer);

// ---------------------------------------------------------------------------
// Break-down

enum class Direction { StepUp, StepDown };

std::string_view to_string(Direction direction);
/// "up" | "down"
Direction parse_direction(std::string_view text);

struct AttributionStep {
  std::string variable;
  Cell value;
  double contribution = 0.0;
};

struct Attribution {
  std::string label;
  double baseline = 0.0;  // mean prediction over the validation data
  std::vector<AttributionStep> steps;
  double prediction = 0.0;
  Direction direction = Direction::StepUp;
};

/// Greedy sequential attribution. baseline + sum(contributions) equals the
/// prediction up to floating-point accumulation.
Attribution break_down(const Explainer& explainer, const Observation& observation,
                       Direction direction = Direction::StepUp);

inline constexpr std::size_t kShapleyOracleMaxVariables = 8;

/// Exact Shapley values by subset enumeration (2^p value evaluations), with
/// val(S) = mean prediction with the columns in S set to the observation.
/// Returned in the data's column order. Intended as a reference for tests.
std::vector<std::pair<std::string, double>> shapley_oracle(const Explainer& explainer,
                                                           const Observation& observation);

}  // namespace boxplain
