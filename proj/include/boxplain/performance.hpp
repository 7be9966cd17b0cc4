#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

#include "boxplain/model.hpp"

namespace boxplain {

enum class LossKind { RMSE, MSE, MAE };

std::string_view to_string(LossKind kind);
/// "rmse" | "mse" | "mae"
LossKind parse_loss(std::string_view text);

double loss(LossKind kind, const Eigen::VectorXd& y, const Eigen::VectorXd& yhat);

struct BoxStats {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double lower_whisker = 0.0;  // most extreme points inside the 1.5 IQR fences
  double upper_whisker = 0.0;
  std::vector<double> outliers;  // ascending
};

/// Tukey boxplot statistics with type-7 quartiles.
BoxStats box_stats(const Eigen::VectorXd& values);

struct SurvivalPoint {
  double t = 0.0;
  double survival = 0.0;  // 1 - ECDF(t), ECDF(t) = #{|r| <= t} / n
};

struct PerformanceResult {
  std::string label;
  Eigen::VectorXd residuals;   // y - f(x)
  Eigen::VectorXd abs_sorted;  // ascending |residuals|
  std::vector<SurvivalPoint> recdf;
  BoxStats box;
  double rmse = 0.0;
};

/// Reverse ECDF step points at each distinct value of `abs_sorted`.
std::vector<SurvivalPoint> reverse_ecdf(const Eigen::VectorXd& abs_sorted);

PerformanceResult model_performance(const Explainer& explainer);

/// Long-format tables for overlaying several models.
struct PerformanceOverlay {
  struct StepRow {
    std::string label;
    double t;
    double survival;
  };
  struct BoxRow {
    std::string label;
    BoxStats box;
    double rmse;
  };
  std::vector<StepRow> steps;
  std::vector<BoxRow> boxes;
};

PerformanceOverlay compare_performance(const std::vector<PerformanceResult>& results);

/// Throws UsageError on an empty list or a repeated label.
void require_distinct_labels(const std::vector<std::string>& labels);

}  // namespace boxplain
