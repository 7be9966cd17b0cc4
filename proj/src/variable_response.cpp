#include "boxplain/variable_response.hpp"

#include <algorithm>

namespace boxplain {

std::string_view to_string(ProfileKind kind) {
  switch (kind) {
    case ProfileKind::PDP: return "pdp";
    case ProfileKind::ALE: return "ale";
    case ProfileKind::CP: return "cp";
  }
  return "pdp";
}

namespace {

const Eigen::VectorXd& numeric_column(const Explainer& explainer, std::string_view variable,
                                      std::string_view what) {
  const auto& column = explainer.data().column(variable);
  if (!column.is_numeric()) {
    throw UsageError(std::string(what) + ": variable '" + std::string(variable) +
                     "' is categorical (use merge)");
  }
  return column.numeric();
}

}  // namespace

ProfileCurve partial_dependence(const Explainer& explainer, std::string_view variable,
                                const GridStrategy& strategy) {
  numeric_column(explainer, variable, "partial dependence");
  ProfileCurve curve;
  curve.label = explainer.label();
  curve.variable = std::string(variable);
  curve.kind = ProfileKind::PDP;
  curve.grid = numeric_grid(explainer.data(), variable, strategy);

  const auto points = static_cast<std::size_t>(curve.grid.size());
  const auto predictions = explainer.predict_each(
      points,
      [&](std::size_t i) {
        return substitute(explainer.data(), variable, curve.grid[static_cast<Eigen::Index>(i)]);
      },
      [&](std::size_t i) { return "grid point " + std::to_string(i); });

  curve.response.resize(curve.grid.size());
  for (std::size_t i = 0; i < points; ++i) {
    curve.response[static_cast<Eigen::Index>(i)] = stable_mean(predictions[i]);
  }
  return curve;
}

ProfileCurve accumulated_local_effects(const Explainer& explainer, std::string_view variable,
                                       std::size_t bins) {
  if (bins < 1) throw UsageError("accumulated local effects: bins must be >= 1");
  const Eigen::VectorXd& x = numeric_column(explainer, variable, "accumulated local effects");

  ProfileCurve curve;
  curve.label = explainer.label();
  curve.variable = std::string(variable);
  curve.kind = ProfileKind::ALE;
  curve.grid = numeric_grid(explainer.data(), variable, GridStrategy::quantiles(bins + 1));
  const Eigen::VectorXd& edges = curve.grid;
  const Eigen::Index edge_count = edges.size();
  if (edge_count < 2) {
    curve.response = Eigen::VectorXd::Zero(edge_count);
    return curve;
  }

  // Bin m (1-based) holds (z_{m-1}, z_m]; bin 1 also takes z_0.
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> bin_of(static_cast<std::size_t>(n));
  Eigen::VectorXd lower(n);
  Eigen::VectorXd upper(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto* first = edges.data() + 1;
    const auto* last = edges.data() + edge_count;
    const auto m = static_cast<Eigen::Index>(std::lower_bound(first, last, x[i]) - edges.data());
    bin_of[static_cast<std::size_t>(i)] = m;
    lower[i] = edges[m - 1];
    upper[i] = edges[m];
  }

  const auto predictions = explainer.predict_each(
      2,
      [&](std::size_t side) {
        return replace_values(explainer.data(), variable, side == 0 ? lower : upper);
      },
      [](std::size_t side) {
        return std::string(side == 0 ? "lower" : "upper") + " bin edges";
      });
  const Eigen::VectorXd difference = predictions[1] - predictions[0];

  const Eigen::Index bin_count = edge_count - 1;
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(bin_count + 1);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(bin_count + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto m = bin_of[static_cast<std::size_t>(i)];
    sums[m] += difference[i];
    counts[m] += 1.0;
  }

  Eigen::VectorXd accumulated = Eigen::VectorXd::Zero(edge_count);
  for (Eigen::Index m = 1; m <= bin_count; ++m) {
    const double effect = counts[m] > 0.0 ? sums[m] / counts[m] : 0.0;
    accumulated[m] = accumulated[m - 1] + effect;
  }
  double weighted = 0.0;
  for (Eigen::Index m = 1; m <= bin_count; ++m) {
    weighted += counts[m] * (accumulated[m - 1] + accumulated[m]) / 2.0;
  }
  const double center = weighted / static_cast<double>(n);
  curve.response = accumulated.array() - center;
  return curve;
}

// ---------------------------------------------------------------------------
// Merging path

std::vector<std::vector<std::string>> MergingPath::groups_at(std::size_t cut_count) const {
  if (cut_count < 1 || cut_count > levels.size()) {
    throw UsageError("cut must be between 1 and " + std::to_string(levels.size()));
  }
  std::vector<std::vector<std::string>> live;
  for (const auto& level : levels) live.push_back({level.level});
  const std::size_t merges = levels.size() - cut_count;
  for (std::size_t s = 0; s < merges; ++s) {
    const auto& step = steps[s];
    const auto a = std::find(live.begin(), live.end(), step.group_a);
    if (a == live.end() || a + 1 == live.end() || *(a + 1) != step.group_b) {
      throw UsageError("merging path is inconsistent at step " + std::to_string(s));
    }
    a->insert(a->end(), step.group_b.begin(), step.group_b.end());
    live.erase(a + 1);
  }
  return live;
}

MergingPath factor_merge(const Explainer& explainer, std::string_view variable,
                         std::optional<std::size_t> cut) {
  const auto& column = explainer.data().column(variable);
  if (column.is_numeric()) {
    throw UsageError("merge: variable '" + std::string(variable) +
                     "' is numeric (use pdp or ale)");
  }
  const Eigen::VectorXd predicted = explainer.predict(explainer.data());

  MergingPath path;
  path.label = explainer.label();
  path.variable = std::string(variable);
  for (const auto& level : column.levels()) {
    std::vector<double> responses;
    for (std::size_t i = 0; i < column.categorical().size(); ++i) {
      if (column.categorical()[i] == level) {
        responses.push_back(predicted[static_cast<Eigen::Index>(i)]);
      }
    }
    const Eigen::Map<const Eigen::VectorXd> view(responses.data(),
                                                 static_cast<Eigen::Index>(responses.size()));
    path.levels.push_back({level, responses.size(), stable_mean(view)});
  }
  std::stable_sort(path.levels.begin(), path.levels.end(),
                   [](const LevelStat& a, const LevelStat& b) { return a.mean < b.mean; });

  struct Group {
    std::vector<std::string> members;
    double count;
    double mean;
  };
  std::vector<Group> live;
  for (const auto& level : path.levels) {
    live.push_back({{level.level}, static_cast<double>(level.count), level.mean});
  }
  const auto ward = [](const Group& a, const Group& b) {
    const double gap = a.mean - b.mean;
    return a.count * b.count / (a.count + b.count) * gap * gap;
  };
  double cumulative = 0.0;
  while (live.size() > 1) {
    std::size_t best = 0;
    double best_cost = ward(live[0], live[1]);
    for (std::size_t i = 1; i + 1 < live.size(); ++i) {
      const double cost = ward(live[i], live[i + 1]);
      if (cost < best_cost) {
        best = i;
        best_cost = cost;
      }
    }
    cumulative += best_cost;
    Group& a = live[best];
    const Group& b = live[best + 1];
    path.steps.push_back({a.members, b.members, best_cost, cumulative});
    const double total = a.count + b.count;
    a.mean = (a.count * a.mean + b.count * b.mean) / total;
    a.count = total;
    a.members.insert(a.members.end(), b.members.begin(), b.members.end());
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }

  path.cut = cut.value_or(std::min(kDefaultMergeCut, path.levels.size()));
  path.groups = path.groups_at(path.cut);
  return path;
}

}  // namespace boxplain
