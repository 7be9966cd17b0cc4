#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <random>

#include "boxplain/error.hpp"
#include "boxplain/performance.hpp"
#include "helpers.hpp"

namespace boxplain {
namespace {

using testing::vec;
using ::testing::ElementsAre;

// A "model" that returns column p, so residuals are y - p.
PerformanceResult performance_of(const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                                 const std::string& label = "m") {
  const Dataset d({Column::numeric("p", p), Column::numeric("y", y)}, "y");
  const Explainer e = explain(
      testing::row_model([](const Dataset& q, std::size_t i) { return testing::num(q, "p", i); }),
      d, y, label);
  return model_performance(e);
}

TEST(Loss, SpecExamples) {
  for (const auto kind : {LossKind::RMSE, LossKind::MSE, LossKind::MAE}) {
    EXPECT_EQ(loss(kind, vec({1, 2}), vec({1, 2})), 0.0);
  }
  EXPECT_DOUBLE_EQ(loss(LossKind::RMSE, vec({0, 0}), vec({3, 4})), std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(loss(LossKind::MAE, vec({0, 0}), vec({3, -3})), 3.0);
  EXPECT_THROW(loss(LossKind::MSE, vec({1}), vec({1, 2})), UsageError);
  EXPECT_THROW(loss(LossKind::MSE, vec({}), vec({})), UsageError);
}

TEST(Loss, RmseSquaredIsMse) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 10.0);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd y(1 + trial), p(1 + trial);
    for (auto& v : y) v = normal(rng);
    for (auto& v : p) v = normal(rng);
    const double rmse = loss(LossKind::RMSE, y, p);
    const double mse = loss(LossKind::MSE, y, p);
    EXPECT_LE(std::abs(rmse * rmse - mse), 1e-12 * mse);
  }
}

TEST(Loss, Parse) {
  EXPECT_EQ(parse_loss("rmse"), LossKind::RMSE);
  EXPECT_EQ(parse_loss("mae"), LossKind::MAE);
  EXPECT_EQ(to_string(LossKind::MSE), "mse");
  EXPECT_THROW(parse_loss("huber"), UsageError);
}

TEST(ModelPerformance, PerfectModel) {
  const auto r = performance_of(vec({1, 2, 3}), vec({1, 2, 3}));
  EXPECT_EQ(r.residuals, Eigen::VectorXd::Zero(3));
  ASSERT_EQ(r.recdf.size(), 1u);
  EXPECT_EQ(r.recdf[0].t, 0.0);
  EXPECT_EQ(r.recdf[0].survival, 0.0);
  EXPECT_EQ(r.box.min, 0.0);
  EXPECT_EQ(r.box.max, 0.0);
  EXPECT_EQ(r.box.median, 0.0);
  EXPECT_TRUE(r.box.outliers.empty());
  EXPECT_EQ(r.rmse, 0.0);
}

TEST(ModelPerformance, ReverseEcdfSteps) {
  const auto r = performance_of(vec({0, 0, 0}), vec({1, -2, 3}));
  EXPECT_EQ(r.residuals, vec({-1, 2, -3}));
  ASSERT_EQ(r.recdf.size(), 3u);
  EXPECT_EQ(r.recdf[0].t, 1.0);
  EXPECT_DOUBLE_EQ(r.recdf[0].survival, 2.0 / 3.0);
  EXPECT_EQ(r.recdf[1].t, 2.0);
  EXPECT_DOUBLE_EQ(r.recdf[1].survival, 1.0 / 3.0);
  EXPECT_EQ(r.recdf[2].t, 3.0);
  EXPECT_EQ(r.recdf[2].survival, 0.0);
}

TEST(BoxStats, OutlierBeyondFence) {
  // Type-7 quartiles of {1,1,1,100}: q1 = 1, q3 = 25.75, fence 62.875.
  const BoxStats box = box_stats(vec({1, 1, 1, 100}));
  EXPECT_EQ(box.q1, 1.0);
  EXPECT_EQ(box.q3, 25.75);
  EXPECT_THAT(box.outliers, ElementsAre(100.0));
  EXPECT_EQ(box.upper_whisker, 1.0);
  EXPECT_EQ(box.lower_whisker, 1.0);
}

TEST(BoxStats, MatchesTukeyDefinition) {
  std::mt19937_64 rng(2);
  std::lognormal_distribution<double> skewed;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd v(5 + trial);
    for (auto& x : v) x = skewed(rng);
    const BoxStats box = box_stats(v);
    const double iqr = box.q3 - box.q1;
    std::vector<double> outside;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const double x : v) {
      if (x < box.q1 - 1.5 * iqr || x > box.q3 + 1.5 * iqr) {
        outside.push_back(x);
      } else {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
      }
    }
    std::sort(outside.begin(), outside.end());
    EXPECT_EQ(box.outliers, outside);
    EXPECT_EQ(box.lower_whisker, lo);
    EXPECT_EQ(box.upper_whisker, hi);
    EXPECT_EQ(box.median, quantile(v, 0.5));
  }
}

TEST(ModelPerformance, RecdfProperties) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 1 + trial;
    Eigen::VectorXd y(n), p(n);
    for (auto& v : y) v = std::round(normal(rng) * 3);  // ties and zeros
    for (auto& v : p) v = std::round(normal(rng) * 3);
    const auto r = performance_of(y, p);
    EXPECT_EQ(r.recdf.back().survival, 0.0);
    EXPECT_EQ(r.recdf.back().t, r.abs_sorted.maxCoeff());
    const double min_positive = [&] {
      double m = std::numeric_limits<double>::infinity();
      for (const double v : r.abs_sorted) {
        if (v > 0) m = std::min(m, v);
      }
      return m;
    }();
    if (std::isfinite(min_positive)) {
      // Survival just below the smallest positive |r|.
      double s = 1.0;
      for (const auto& point : r.recdf) {
        if (point.t < min_positive) s = point.survival;
      }
      EXPECT_GE(s, 1.0 / n);
    }
    for (const auto& point : r.recdf) {
      const auto above = (r.abs_sorted.array() > point.t).count();
      EXPECT_DOUBLE_EQ(point.survival, static_cast<double>(above) / n);
    }
    EXPECT_DOUBLE_EQ(r.rmse, loss(LossKind::RMSE, y, p));
  }
}

// Fraction of model-A |residuals| above max(model-B |residuals|), read off
// the recdf table, agrees with direct counting.
TEST(ModelPerformance, ExceedanceFractionFromRecdf) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd y(50), pa(50), pb(50);
    for (auto& v : y) v = normal(rng);
    for (auto& v : pa) v = normal(rng) * 2;
    for (auto& v : pb) v = normal(rng);
    const auto a = performance_of(y, pa, "a");
    const auto b = performance_of(y, pb, "b");
    const double threshold = b.abs_sorted.maxCoeff();
    double from_table = 1.0;
    for (const auto& point : a.recdf) {
      if (point.t <= threshold) from_table = point.survival;
    }
    const auto direct = (a.abs_sorted.array() > threshold).count();
    EXPECT_DOUBLE_EQ(from_table, static_cast<double>(direct) / 50.0);
  }
}

TEST(ComparePerformance, Overlay) {
  const auto a = performance_of(vec({0, 0, 0}), vec({1, 2, 3}), "a");
  const auto b = performance_of(vec({0, 0, 0}), vec({4, 5, 6}), "b");
  const auto single = compare_performance({a});
  ASSERT_EQ(single.steps.size(), a.recdf.size());
  for (std::size_t i = 0; i < a.recdf.size(); ++i) {
    EXPECT_EQ(single.steps[i].label, "a");
    EXPECT_EQ(single.steps[i].t, a.recdf[i].t);
    EXPECT_EQ(single.steps[i].survival, a.recdf[i].survival);
  }
  const auto both = compare_performance({a, b});
  EXPECT_EQ(both.steps.size(), 6u);
  EXPECT_EQ(both.boxes.size(), 2u);
  EXPECT_THROW(compare_performance({a, a}), UsageError);
  EXPECT_THROW(compare_performance({}), UsageError);
}

TEST(ModelPerformance, DoesNotMutateData) {
  std::mt19937_64 rng(5);
  const Dataset d = testing::random_dataset(rng, 40, 2);
  const Dataset copy = d;
  const Explainer e = explain(fit_linear(d.features(), d.target_values()).predict_function(), d,
                              d.target_values(), "lm");
  const Dataset before = e.data();
  model_performance(e);
  EXPECT_EQ(e.data(), before);
  EXPECT_EQ(d, copy);
}

}  // namespace
}  // namespace boxplain
