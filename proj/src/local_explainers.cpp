#include "boxplain/local_explainers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace boxplain {

CPProfile ceteris_paribus(const Explainer& explainer, const Observation& observation,
                          const std::optional<std::vector<std::string>>& variables,
                          const GridStrategy& strategy) {
  const Dataset& data = explainer.data();
  observation.check_schema(data);
  const std::vector<std::string> names = variables.value_or(data.names());
  for (const auto& name : names) {
    if (!data.has_column(name)) throw UsageError("unknown variable '" + name + "'");
  }

  CPProfile profile;
  profile.label = explainer.label();
  profile.observation = observation;
  profile.prediction = explainer.predict(observation.to_dataset(data))[0];

  for (const auto& name : names) {
    const auto& column = data.column(name);
    CPCurve cp;
    cp.curve.label = explainer.label();
    cp.curve.variable = name;
    cp.curve.kind = ProfileKind::CP;
    cp.observed = observation.at(name);
    if (column.is_numeric()) {
      const Eigen::VectorXd base = numeric_grid(data, name, strategy);
      std::vector<double> grid(base.begin(), base.end());
      grid.push_back(std::get<double>(cp.observed));
      std::sort(grid.begin(), grid.end());
      grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      cp.curve.grid = Eigen::Map<const Eigen::VectorXd>(grid.data(),
                                                        static_cast<Eigen::Index>(grid.size()));
    } else {
      cp.levels = column.levels();
      const auto& own = std::get<std::string>(cp.observed);
      if (!std::binary_search(cp.levels.begin(), cp.levels.end(), own)) {
        cp.levels.insert(std::upper_bound(cp.levels.begin(), cp.levels.end(), own), own);
      }
    }
    profile.curves.push_back(std::move(cp));
  }

  const auto predictions = explainer.predict_each(
      profile.curves.size(),
      [&](std::size_t i) {
        const CPCurve& cp = profile.curves[i];
        const bool numeric = cp.levels.empty();
        const std::size_t m =
            numeric ? static_cast<std::size_t>(cp.curve.grid.size()) : cp.levels.size();
        const Dataset rows = observation.to_dataset(data, m);
        if (numeric) return replace_values(rows, cp.curve.variable, cp.curve.grid);
        return rows.with_column(Column::categorical(cp.curve.variable, cp.levels));
      },
      [&](std::size_t i) { return "variable '" + profile.curves[i].curve.variable + "'"; });
  for (std::size_t i = 0; i < profile.curves.size(); ++i) {
    profile.curves[i].curve.response = predictions[i];
  }
  return profile;
}

CPProfile normalize_cp(CPProfile profile, const Explainer& explainer) {
  for (auto& cp : profile.curves) {
    if (!cp.levels.empty()) continue;
    const auto& column = explainer.data().column(cp.curve.variable).numeric();
    Eigen::VectorXd normalized(cp.curve.grid.size());
    for (Eigen::Index i = 0; i < cp.curve.grid.size(); ++i) {
      normalized[i] = ecdf_position(column, cp.curve.grid[i]);
    }
    cp.normalized = std::move(normalized);
  }
  return profile;
}

// ---------------------------------------------------------------------------
// Break-down

std::string_view to_string(Direction direction) {
  return direction == Direction::StepUp ? "up" : "down";
}

Direction parse_direction(std::string_view text) {
  if (text == "up") return Direction::StepUp;
  if (text == "down") return Direction::StepDown;
  throw UsageError("direction must be 'up' or 'down', got '" + std::string(text) + "'");
}

namespace {

// Index of the candidate to take next. Ties go to the smallest name.
std::size_t pick(const std::vector<std::string>& names, const std::vector<double>& score,
                 bool largest) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < names.size(); ++i) {
    const bool better = largest ? score[i] > score[best] : score[i] < score[best];
    if (better || (score[i] == score[best] && names[i] < names[best])) best = i;
  }
  return best;
}

}  // namespace

Attribution break_down(const Explainer& explainer, const Observation& observation,
                       Direction direction) {
  const Dataset& data = explainer.data();
  observation.check_schema(data);

  Attribution attribution;
  attribution.label = explainer.label();
  attribution.direction = direction;
  attribution.baseline = stable_mean(explainer.predict(data));
  attribution.prediction = explainer.predict(observation.to_dataset(data))[0];

  const bool up = direction == Direction::StepUp;
  const Dataset everything_fixed = observation.to_dataset(data, data.rows());
  Dataset current = up ? data : everything_fixed;
  double value = up ? attribution.baseline : stable_mean(explainer.predict(current));
  std::vector<std::string> remaining = data.names();

  std::vector<AttributionStep> steps;
  for (std::size_t step = 0; !remaining.empty(); ++step) {
    // StepUp fixes a column to the observation; StepDown restores it.
    const auto candidate = [&](std::size_t i) {
      const auto& name = remaining[i];
      return current.with_column(up ? everything_fixed.column(name) : data.column(name));
    };
    const auto predictions = explainer.predict_each(
        remaining.size(), candidate, [&](std::size_t i) {
          return "break-down step " + std::to_string(step) + ", variable '" + remaining[i] + "'";
        });
    std::vector<double> means(remaining.size());
    std::vector<double> shift(remaining.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      means[i] = stable_mean(predictions[i]);
      shift[i] = std::abs(means[i] - value);
    }
    const std::size_t chosen = pick(remaining, shift, up);
    const auto& name = remaining[chosen];
    steps.push_back({name, observation.at(name),
                     up ? means[chosen] - value : value - means[chosen]});
    current = candidate(chosen);
    value = means[chosen];
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
  }
  // Relaxation order reversed is the order in which variables are fixed.
  if (!up) std::reverse(steps.begin(), steps.end());
  attribution.steps = std::move(steps);
  return attribution;
}

std::vector<std::pair<std::string, double>> shapley_oracle(const Explainer& explainer,
                                                           const Observation& observation) {
  const Dataset& data = explainer.data();
  observation.check_schema(data);
  const std::size_t p = data.cols();
  if (p > kShapleyOracleMaxVariables) {
    throw UsageError("shapley oracle supports at most " +
                     std::to_string(kShapleyOracleMaxVariables) + " variables, got " +
                     std::to_string(p));
  }
  const auto names = data.names();
  const Dataset fixed = observation.to_dataset(data, data.rows());
  const std::size_t subsets = std::size_t{1} << p;
  const auto predictions = explainer.predict_each(subsets, [&](std::size_t mask) {
    Dataset query = data;
    for (std::size_t j = 0; j < p; ++j) {
      if (mask & (std::size_t{1} << j)) query = query.with_column(fixed.column(names[j]));
    }
    return query;
  });
  std::vector<double> value(subsets);
  for (std::size_t mask = 0; mask < subsets; ++mask) value[mask] = stable_mean(predictions[mask]);

  std::vector<double> factorial(p + 1, 1.0);
  for (std::size_t k = 1; k <= p; ++k) factorial[k] = factorial[k - 1] * static_cast<double>(k);

  std::vector<std::pair<std::string, double>> out;
  for (std::size_t j = 0; j < p; ++j) {
    const std::size_t bit = std::size_t{1} << j;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(mask));
      const double weight = factorial[size] * factorial[p - size - 1] / factorial[p];
      phi += weight * (value[mask | bit] - value[mask]);
    }
    out.emplace_back(names[j], phi);
  }
  return out;
}

}  // namespace boxplain
