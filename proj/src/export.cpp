#include "boxplain/viz.hpp"

namespace boxplain {

namespace {

Json cell_json(const Cell& cell) {
  if (const auto* number = std::get_if<double>(&cell)) return *number;
  return std::get<std::string>(cell);
}

Json vector_json(const Eigen::VectorXd& values) {
  Json out = Json::array();
  for (const double v : values) out.push_back(v);
  return out;
}

Json points_json(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < x.size(); ++i) out.push_back(Json::array({x[i], y[i]}));
  return out;
}

Json box_json(const BoxStats& box) {
  Json outliers = Json::array();
  for (const double v : box.outliers) outliers.push_back(v);
  return {{"min", box.min},
          {"q1", box.q1},
          {"median", box.median},
          {"q3", box.q3},
          {"max", box.max},
          {"lower_whisker", box.lower_whisker},
          {"upper_whisker", box.upper_whisker},
          {"outliers", outliers}};
}

Json to_json_impl(const PerformanceResult& r) {
  Json recdf = Json::array();
  for (const auto& point : r.recdf) recdf.push_back(Json::array({point.t, point.survival}));
  return {{"kind", "performance"},
          {"label", r.label},
          {"rmse", r.rmse},
          {"box", box_json(r.box)},
          {"recdf", recdf},
          {"residuals", vector_json(r.residuals)}};
}

Json to_json_impl(const ProfileCurve& r) {
  return {{"kind", std::string(to_string(r.kind))},
          {"label", r.label},
          {"variable", r.variable},
          {"points", points_json(r.grid, r.response)}};
}

Json to_json_impl(const MergingPath& r) {
  Json levels = Json::array();
  for (const auto& level : r.levels) {
    levels.push_back({{"level", level.level}, {"count", level.count}, {"mean", level.mean}});
  }
  Json steps = Json::array();
  for (const auto& step : r.steps) {
    steps.push_back({{"group_a", step.group_a},
                     {"group_b", step.group_b},
                     {"cost", step.cost},
                     {"cumulative_cost", step.cumulative_cost}});
  }
  return {{"kind", "factor_merge"}, {"label", r.label}, {"variable", r.variable},
          {"levels", levels},       {"steps", steps},   {"cut", r.cut},
          {"groups", r.groups}};
}

Json to_json_impl(const ImportanceResult& r) {
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    Json permuted = Json::array();
    for (const double v : row.permuted) permuted.push_back(v);
    rows.push_back({{"variable", row.variable},
                    {"permuted_mean", row.permuted_mean},
                    {"permuted", permuted},
                    {"drop", row.drop}});
  }
  return {{"kind", "importance"},
          {"label", r.label},
          {"loss", std::string(to_string(r.loss))},
          {"baseline", r.baseline},
          {"rows", rows},
          {"all_shuffled", r.all_shuffled},
          {"repeats", r.repeats},
          {"seed", r.seed}};
}

Json to_json_impl(const CPProfile& r) {
  Json observation = Json::object();
  for (const auto& [name, value] : r.observation.values()) observation[name] = cell_json(value);
  Json curves = Json::array();
  for (const auto& cp : r.curves) {
    Json curve = {{"variable", cp.curve.variable}, {"observed", cell_json(cp.observed)}};
    if (cp.levels.empty()) {
      curve["points"] = points_json(cp.curve.grid, cp.curve.response);
      if (cp.normalized) curve["normalized"] = points_json(*cp.normalized, cp.curve.response);
    } else {
      Json points = Json::array();
      for (std::size_t i = 0; i < cp.levels.size(); ++i) {
        points.push_back(
            Json::array({cp.levels[i], cp.curve.response[static_cast<Eigen::Index>(i)]}));
      }
      curve["points"] = points;
    }
    curves.push_back(std::move(curve));
  }
  return {{"kind", "cp"},
          {"label", r.label},
          {"anchor", {{"observation", observation}, {"prediction", r.prediction}}},
          {"curves", curves}};
}

Json to_json_impl(const Attribution& r) {
  Json steps = Json::array();
  for (const auto& step : r.steps) {
    steps.push_back({{"variable", step.variable},
                     {"value", cell_json(step.value)},
                     {"contribution", step.contribution}});
  }
  return {{"kind", "breakdown"},
          {"label", r.label},
          {"baseline", r.baseline},
          {"steps", steps},
          {"prediction", r.prediction},
          {"direction", std::string(to_string(r.direction))}};
}

}  // namespace

std::string result_kind(const ExplainerResult& result) {
  struct Visitor {
    std::string operator()(const PerformanceResult&) const { return "performance"; }
    std::string operator()(const ProfileCurve& r) const { return std::string(to_string(r.kind)); }
    std::string operator()(const MergingPath&) const { return "factor_merge"; }
    std::string operator()(const ImportanceResult&) const { return "importance"; }
    std::string operator()(const CPProfile&) const { return "cp"; }
    std::string operator()(const Attribution&) const { return "breakdown"; }
  };
  return std::visit(Visitor{}, result);
}

const std::string& result_label(const ExplainerResult& result) {
  return std::visit([](const auto& r) -> const std::string& { return r.label; }, result);
}

Json to_json(const ExplainerResult& result) {
  return std::visit([](const auto& r) { return to_json_impl(r); }, result);
}

std::string export_json(const ExplainerResult& result) {
  return canonical_json(to_json(result));
}

std::string export_json(const std::vector<ExplainerResult>& results) {
  Json out = Json::array();
  for (const auto& result : results) out.push_back(to_json(result));
  return canonical_json(out);
}

}  // namespace boxplain
