#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <map>
#include <random>

#include "boxplain/error.hpp"
#include "boxplain/local_explainers.hpp"
#include "boxplain/variable_response.hpp"
#include "helpers.hpp"

namespace boxplain {
namespace {

using testing::csv;
using testing::num;
using testing::row_model;
using testing::vec;
using ::testing::ElementsAre;

Dataset two_columns(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-2.0, 3.0);
  Eigen::VectorXd x1(static_cast<Eigen::Index>(n)), x2(static_cast<Eigen::Index>(n));
  for (auto& v : x1) v = u(rng);
  for (auto& v : x2) v = u(rng);
  return Dataset({Column::numeric("x1", x1), Column::numeric("x2", x2)});
}

double g1(double x) { return std::sin(2 * x) + 0.5 * x * x; }
double g2(double x) { return std::exp(x / 2); }

PredictFunction additive() {
  return row_model([](const Dataset& q, std::size_t i) {
    return g1(num(q, "x1", i)) + g2(num(q, "x2", i));
  });
}

TEST(PartialDependence, LinearModelExact) {
  std::mt19937_64 rng(1);
  const Dataset d = two_columns(rng, 50);
  const Explainer e = testing::make_explainer(testing::additive_model({{"x1", 2.0}}, 3.0), d);
  const ProfileCurve pdp = partial_dependence(e, "x1");
  EXPECT_EQ(pdp.kind, ProfileKind::PDP);
  EXPECT_EQ(pdp.grid.size(), 21);
  for (Eigen::Index i = 0; i < pdp.grid.size(); ++i) {
    EXPECT_EQ(pdp.response[i], 2 * pdp.grid[i] + 3);
  }
}

TEST(PartialDependence, ProductModel) {
  const Dataset d = csv("x1,x2\n0,1\n5,3\n");
  const Explainer e = testing::make_explainer(
      row_model([](const Dataset& q, std::size_t i) { return num(q, "x1", i) * num(q, "x2", i); }),
      d);
  const ProfileCurve pdp = partial_dependence(e, "x1", GridStrategy::uniform(6));
  for (Eigen::Index i = 0; i < pdp.grid.size(); ++i) {
    EXPECT_NEAR(pdp.response[i], 2 * pdp.grid[i], 1e-12);
  }
}

TEST(PartialDependence, SingleRowEqualsCeterisParibus) {
  std::mt19937_64 rng(2);
  const Dataset one = two_columns(rng, 30).take_rows(std::vector<std::size_t>{4});
  const Explainer e = testing::make_explainer(additive(), one);
  const ProfileCurve pdp = partial_dependence(e, "x1");
  const CPProfile cp =
      ceteris_paribus(e, Observation::from_row(one, 0), std::vector<std::string>{"x1"});
  ASSERT_EQ(pdp.grid.size(), 1);
  EXPECT_EQ(cp.curves[0].curve.grid, pdp.grid);
  EXPECT_EQ(cp.curves[0].curve.response, pdp.response);
  EXPECT_EQ(pdp.response[0], e.predict(one)[0]);
}

TEST(PartialDependence, IgnoredVariableIsFlat) {
  std::mt19937_64 rng(3);
  const Dataset d = two_columns(rng, 80);
  const Explainer e = testing::make_explainer(
      row_model([](const Dataset& q, std::size_t i) { return g2(num(q, "x2", i)); }), d);
  const ProfileCurve pdp = partial_dependence(e, "x1");
  EXPECT_LT(pdp.response.maxCoeff() - pdp.response.minCoeff(), 1e-10);
}

TEST(PartialDependence, Errors) {
  const Dataset d = csv("x,c\n1,a\n2,b\n");
  const Explainer e = testing::make_explainer(testing::additive_model({{"x", 1.0}}, 0.0), d);
  EXPECT_THROW(partial_dependence(e, "c"), UsageError);
  EXPECT_THROW(partial_dependence(e, "nope"), UsageError);
}

// Straightforward ALE written from the definition, one row at a time.
Eigen::VectorXd ale_oracle(const std::function<double(double, std::size_t)>& f,
                           const Eigen::VectorXd& x, const Eigen::VectorXd& z) {
  const Eigen::Index K = z.size() - 1;
  std::vector<double> sum(K + 1, 0.0), count(K + 1, 0.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::Index m = 1;
    while (m < K && x[i] > z[m]) ++m;
    sum[m] += f(z[m], i) - f(z[m - 1], i);
    count[m] += 1;
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(K + 1);
  for (Eigen::Index m = 1; m <= K; ++m) g[m] = g[m - 1] + (count[m] ? sum[m] / count[m] : 0.0);
  double centre = 0.0;
  for (Eigen::Index m = 1; m <= K; ++m) centre += count[m] * (g[m - 1] + g[m]) / 2;
  return g.array() - centre / static_cast<double>(x.size());
}

TEST(AccumulatedLocalEffects, MatchesDefinition) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Dataset d = two_columns(rng, 40 + 17 * trial);
    const Explainer e = testing::make_explainer(
        row_model([](const Dataset& q, std::size_t i) {
          return g1(num(q, "x1", i)) * (1 + num(q, "x2", i) * num(q, "x2", i));
        }),
        d);
    const std::size_t k = 3 + trial;
    const ProfileCurve ale = accumulated_local_effects(e, "x1", k);
    const Eigen::VectorXd& x2 = d.column("x2").numeric();
    const Eigen::VectorXd oracle = ale_oracle(
        [&](double z, std::size_t i) {
          return g1(z) * (1 + x2[static_cast<Eigen::Index>(i)] * x2[static_cast<Eigen::Index>(i)]);
        },
        d.column("x1").numeric(), ale.grid);
    ASSERT_EQ(ale.grid, numeric_grid(d, "x1", GridStrategy::quantiles(k + 1)));
    for (Eigen::Index m = 0; m < oracle.size(); ++m) EXPECT_NEAR(ale.response[m], oracle[m], 1e-10);
  }
}

TEST(AccumulatedLocalEffects, LinearSlope) {
  Eigen::VectorXd x(11);
  for (int i = 0; i <= 10; ++i) x[i] = i;
  const Dataset d({Column::numeric("x", x)});
  const Explainer e = testing::make_explainer(testing::additive_model({{"x", 2.0}}, 3.0), d);
  for (std::size_t k : {1, 2, 4, 7, 10}) {
    const ProfileCurve ale = accumulated_local_effects(e, "x", k);
    for (Eigen::Index m = 1; m < ale.grid.size(); ++m) {
      EXPECT_NEAR(ale.response[m] - ale.response[m - 1], 2 * (ale.grid[m] - ale.grid[m - 1]),
                  1e-12);
    }
    const auto last = ale.grid.size() - 1;
    EXPECT_NEAR(ale.response[last] - ale.response[0], 2 * (ale.grid[last] - ale.grid[0]), 1e-12);
  }
  // 20 bins over 11 integers: half the bins are empty and stay flat.
  const ProfileCurve ale = accumulated_local_effects(e, "x", 20);
  ASSERT_EQ(ale.grid.size(), 21);
  for (Eigen::Index m = 1; m < ale.grid.size(); ++m) {
    const bool occupied = m == 1 || ale.grid[m] == std::floor(ale.grid[m]);
    EXPECT_NEAR(ale.response[m] - ale.response[m - 1], occupied ? 1.0 : 0.0, 1e-12) << m;
  }
}

TEST(AccumulatedLocalEffects, ConstantModelIsFlatZero) {
  std::mt19937_64 rng(5);
  const Dataset d = two_columns(rng, 60);
  const Explainer e =
      testing::make_explainer(row_model([](const Dataset&, std::size_t) { return 4.2; }), d);
  const ProfileCurve ale = accumulated_local_effects(e, "x1");
  EXPECT_EQ(ale.response, Eigen::VectorXd::Zero(ale.grid.size()));
}

TEST(AccumulatedLocalEffects, AdditiveIgnoresOtherColumn) {
  std::mt19937_64 rng(6);
  const Dataset d = two_columns(rng, 120);
  Eigen::VectorXd other(120);
  std::normal_distribution<double> normal(0, 5);
  for (auto& v : other) v = normal(rng);
  const Dataset changed = d.with_column(Column::numeric("x2", other));
  const ProfileCurve a = accumulated_local_effects(testing::make_explainer(additive(), d), "x1");
  const ProfileCurve b =
      accumulated_local_effects(testing::make_explainer(additive(), changed), "x1");
  ASSERT_EQ(a.grid, b.grid);
  for (Eigen::Index m = 0; m < a.grid.size(); ++m) EXPECT_NEAR(a.response[m], b.response[m], 1e-12);
}

TEST(AccumulatedLocalEffects, CenteredWeightedMeanIsZero) {
  std::mt19937_64 rng(7);
  const Dataset d = two_columns(rng, 90);
  const Explainer e = testing::make_explainer(additive(), d);
  const ProfileCurve ale = accumulated_local_effects(e, "x1", 9);
  const Eigen::VectorXd& x = d.column("x1").numeric();
  const Eigen::VectorXd& z = ale.grid;
  double weighted = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::Index m = 1;
    while (m < z.size() - 1 && x[i] > z[m]) ++m;
    weighted += (ale.response[m - 1] + ale.response[m]) / 2;
  }
  EXPECT_LT(std::abs(weighted / static_cast<double>(x.size())), 1e-10);
}

TEST(AccumulatedLocalEffects, AgreesWithPdpForAdditiveModels) {
  std::mt19937_64 rng(8);
  const Dataset d = two_columns(rng, 150);
  const Explainer e = testing::make_explainer(additive(), d);
  const ProfileCurve ale = accumulated_local_effects(e, "x1", 12);
  const ProfileCurve pdp = partial_dependence(e, "x1", GridStrategy::quantiles(13));
  ASSERT_EQ(ale.grid, pdp.grid);
  const Eigen::VectorXd a = ale.response.array() - ale.response.mean();
  const Eigen::VectorXd p = pdp.response.array() - pdp.response.mean();
  EXPECT_LT((a - p).cwiseAbs().maxCoeff(), 1e-8);
}

Explainer level_model(const Dataset& d, std::map<std::string, double> means) {
  return testing::make_explainer(
      row_model([means](const Dataset& q, std::size_t i) {
        return means.at(q.column("d").categorical()[i]);
      }),
      d);
}

TEST(FactorMerge, ClosestNeighboursMergeFirst) {
  const Dataset d = csv("d\nA\nA\nB\nB\nC\nC\n");
  const MergingPath path = factor_merge(level_model(d, {{"A", 1.0}, {"B", 1.01}, {"C", 5.0}}), "d");
  ASSERT_EQ(path.steps.size(), 2u);
  EXPECT_THAT(path.steps[0].group_a, ElementsAre("A"));
  EXPECT_THAT(path.steps[0].group_b, ElementsAre("B"));
  // Ward cost n_A n_B / (n_A + n_B) (mean_A - mean_B)^2.
  EXPECT_NEAR(path.steps[0].cost, 1.0 * 0.01 * 0.01, 1e-15);
  EXPECT_THAT(path.groups, (ElementsAre(ElementsAre("A"), ElementsAre("B"), ElementsAre("C"))));
  EXPECT_THAT(path.groups_at(2), (ElementsAre(ElementsAre("A", "B"), ElementsAre("C"))));
}

TEST(FactorMerge, IdenticalLevelsCostNothing) {
  const Dataset d = csv("d\nx\ny\nx\n");
  const MergingPath path = factor_merge(level_model(d, {{"x", 2.0}, {"y", 2.0}}), "d");
  ASSERT_EQ(path.steps.size(), 1u);
  EXPECT_EQ(path.steps[0].cost, 0.0);
}

TEST(FactorMerge, SingleLevel) {
  const Dataset d = csv("d\nq\nq\n");
  const MergingPath path = factor_merge(level_model(d, {{"q", 1.0}}), "d");
  EXPECT_TRUE(path.steps.empty());
  EXPECT_THAT(path.groups, ElementsAre(ElementsAre("q")));
}

TEST(FactorMerge, TotalCostIsBetweenGroupSse) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset d = testing::random_dataset(rng, 30 + trial * 5, 2, true);
    const Explainer e = testing::make_explainer(
        fit_tree(d.features(), d.target_values(), 4, 2).predict_function(), d);
    const MergingPath path = factor_merge(e, "d");
    const Eigen::VectorXd pred = e.predict(e.data());
    const auto& levels = d.column("d").categorical();
    std::map<std::string, std::pair<double, double>> groups;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      groups[levels[i]].first += pred[static_cast<Eigen::Index>(i)];
      groups[levels[i]].second += 1;
    }
    const double grand = pred.mean();
    double between = 0.0;
    for (const auto& [level, sc] : groups) {
      const double mean = sc.first / sc.second;
      between += sc.second * (mean - grand) * (mean - grand);
    }
    ASSERT_FALSE(path.steps.empty());
    EXPECT_NEAR(path.steps.back().cumulative_cost, between, 1e-9 * std::max(1.0, between));
    for (std::size_t s = 1; s < path.levels.size(); ++s) {
      EXPECT_LE(path.levels[s - 1].mean, path.levels[s].mean);
    }
  }
}

TEST(FactorMerge, NumericVariableRejected) {
  const Dataset d = csv("x\n1\n2\n");
  EXPECT_THROW(factor_merge(testing::make_explainer(testing::additive_model({{"x", 1}}, 0), d), "x"),
               UsageError);
}

}  // namespace
}  // namespace boxplain
