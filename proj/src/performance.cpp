#include "boxplain/performance.hpp"

#include <algorithm>
#include <set>

namespace boxplain {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::RMSE: return "rmse";
    case LossKind::MSE: return "mse";
    case LossKind::MAE: return "mae";
  }
  return "rmse";
}

LossKind parse_loss(std::string_view text) {
  if (text == "rmse") return LossKind::RMSE;
  if (text == "mse") return LossKind::MSE;
  if (text == "mae") return LossKind::MAE;
  throw UsageError("unknown loss '" + std::string(text) + "' (rmse, mse or mae)");
}

double loss(LossKind kind, const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  if (y.size() != yhat.size()) throw UsageError("loss: length mismatch");
  if (y.size() == 0) throw UsageError("loss: empty input");
  const Eigen::ArrayXd diff = (y - yhat).array();
  const double n = static_cast<double>(y.size());
  switch (kind) {
    case LossKind::MSE: return diff.square().sum() / n;
    case LossKind::RMSE: return std::sqrt(diff.square().sum() / n);
    case LossKind::MAE: return diff.abs().sum() / n;
  }
  return 0.0;
}

void require_distinct_labels(const std::vector<std::string>& labels) {
  if (labels.empty()) throw UsageError("at least one result is required");
  std::set<std::string> seen;
  for (const auto& label : labels) {
    if (!seen.insert(label).second) throw UsageError("duplicate model label '" + label + "'");
  }
}

BoxStats box_stats(const Eigen::VectorXd& values) {
  if (values.size() == 0) throw UsageError("box_stats: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  BoxStats box;
  box.min = sorted.front();
  box.max = sorted.back();
  box.q1 = quantile(values, 0.25);
  box.median = quantile(values, 0.5);
  box.q3 = quantile(values, 0.75);
  const double iqr = box.q3 - box.q1;
  const double low_fence = box.q1 - 1.5 * iqr;
  const double high_fence = box.q3 + 1.5 * iqr;
  box.lower_whisker = box.q1;
  box.upper_whisker = box.q3;
  bool have_low = false;
  for (const double v : sorted) {
    if (v < low_fence || v > high_fence) {
      box.outliers.push_back(v);
      continue;
    }
    if (!have_low) {
      box.lower_whisker = v;
      have_low = true;
    }
    box.upper_whisker = v;
  }
  return box;
}

std::vector<SurvivalPoint> reverse_ecdf(const Eigen::VectorXd& abs_sorted) {
  std::vector<SurvivalPoint> points;
  const auto n = abs_sorted.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    // Last index of each run of equal values.
    if (i + 1 < n && abs_sorted[i + 1] == abs_sorted[i]) continue;
    const double above = static_cast<double>(n - i - 1);
    points.push_back({abs_sorted[i], above / static_cast<double>(n)});
  }
  return points;
}

PerformanceResult model_performance(const Explainer& explainer) {
  PerformanceResult result;
  result.label = explainer.label();
  const Eigen::VectorXd predicted = explainer.predict(explainer.data());
  result.residuals = explainer.y() - predicted;
  std::vector<double> sorted(result.residuals.size());
  for (Eigen::Index i = 0; i < result.residuals.size(); ++i) {
    sorted[static_cast<std::size_t>(i)] = std::abs(result.residuals[i]);
  }
  std::sort(sorted.begin(), sorted.end());
  result.abs_sorted = Eigen::Map<const Eigen::VectorXd>(sorted.data(),
                                                        static_cast<Eigen::Index>(sorted.size()));
  result.recdf = reverse_ecdf(result.abs_sorted);
  result.box = box_stats(result.abs_sorted);
  result.rmse = loss(LossKind::RMSE, explainer.y(), predicted);
  return result;
}

PerformanceOverlay compare_performance(const std::vector<PerformanceResult>& results) {
  std::vector<std::string> labels;
  for (const auto& result : results) labels.push_back(result.label);
  require_distinct_labels(labels);
  PerformanceOverlay overlay;
  for (const auto& result : results) {
    for (const auto& point : result.recdf) {
      overlay.steps.push_back({result.label, point.t, point.survival});
    }
    overlay.boxes.push_back({result.label, result.box, result.rmse});
  }
  return overlay;
}

}  // namespace boxplain
