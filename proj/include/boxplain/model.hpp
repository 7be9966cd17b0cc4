#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "boxplain/data.hpp"

namespace boxplain {

/// The only thing an explainer may do with a model: score query rows.
struct PredictFunction {
  std::function<Eigen::VectorXd(const Dataset&)> fn;
  /// Safe to call from several threads at once.
  bool reentrant = false;
};

class Explainer {
 public:
  const Dataset& data() const { return data_; }
  const Eigen::VectorXd& y() const { return y_; }
  const std::string& label() const { return label_; }
  bool reentrant() const { return predict_.reentrant; }
  std::size_t jobs() const { return jobs_; }

  /// Copy that may issue up to `jobs` concurrent predict calls when the
  /// model is reentrant.
  Explainer with_jobs(std::size_t jobs) const;

  /// Schema-checked, output-validated prediction. Non-reentrant models are
  /// serialized through a gate shared by all copies of this explainer.
  Eigen::VectorXd predict(const Dataset& query) const;

  /// Predicts on make_query(i) for every i < count, concurrently when
  /// allowed. Results are in index order. Adapter failures are rethrown
  /// prefixed with describe(i).
  std::vector<Eigen::VectorXd> predict_each(
      std::size_t count, const std::function<Dataset(std::size_t)>& make_query,
      const std::function<std::string(std::size_t)>& describe = {}) const;

 private:
  friend Explainer explain(PredictFunction, Dataset, Eigen::VectorXd, std::string);

  PredictFunction predict_;
  Dataset data_;
  Eigen::VectorXd y_;
  std::string label_;
  std::shared_ptr<std::mutex> gate_;
  std::size_t jobs_ = 1;
};

/// Wraps a model. A target column recorded in `data` is dropped. Probes the
/// model on the first min(n, 8) rows.
Explainer explain(PredictFunction predict, Dataset data, Eigen::VectorXd y,
                  std::string label);

Eigen::VectorXd predict_batch(const Explainer& explainer, const Dataset& query);

struct FeatureSpec {
  std::string name;
  ColumnKind kind;
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

std::vector<FeatureSpec> feature_schema(const Dataset& data);

// ---------------------------------------------------------------------------
// Reference models

/// Ordinary least squares with dummy-coded categoricals (first level is the
/// reference).
class LinearModel {
 public:
  struct NumericTerm {
    std::string variable;
    double coefficient = 0.0;
  };
  struct CategoricalTerm {
    std::string variable;
    std::string reference;
    std::map<std::string, double> offsets;  // non-reference levels
  };
  using Term = std::variant<NumericTerm, CategoricalTerm>;

  LinearModel() = default;
  LinearModel(double intercept, std::vector<Term> terms)
      : intercept_(intercept), terms_(std::move(terms)) {}

  double intercept() const { return intercept_; }
  const std::vector<Term>& terms() const { return terms_; }
  /// Coefficient of a numeric term; throws UsageError if absent.
  double coefficient(std::string_view variable) const;

  /// Row-by-row evaluation, so a row's score never depends on its batch.
  /// Unseen categorical levels raise ModelAdapterError.
  Eigen::VectorXd predict(const Dataset& query) const;
  PredictFunction predict_function() const;

  std::string to_json() const;

 private:
  double intercept_ = 0.0;
  std::vector<Term> terms_;
};

/// Throws FitError naming the first column that makes the design rank
/// deficient.
LinearModel fit_linear(const Dataset& data, const Eigen::VectorXd& y);

class RegressionTree {
 public:
  struct Node {
    // Leaf when left < 0.
    int left = -1;
    int right = -1;
    std::string variable;
    bool categorical = false;
    double threshold = 0.0;                 // numeric: x < threshold goes left
    std::vector<std::string> left_levels;   // categorical: members go left
    double value = 0.0;                     // mean training response
    std::size_t count = 0;
  };

  RegressionTree() = default;
  RegressionTree(std::vector<Node> nodes, int max_depth, int min_leaf)
      : nodes_(std::move(nodes)), max_depth_(max_depth), min_leaf_(min_leaf) {}

  const std::vector<Node>& nodes() const { return nodes_; }
  int max_depth() const { return max_depth_; }
  int min_leaf() const { return min_leaf_; }
  std::size_t leaf_count() const;
  int depth() const;

  /// Unseen categorical levels follow the right branch.
  Eigen::VectorXd predict(const Dataset& query) const;
  PredictFunction predict_function() const;

  std::string to_json() const;

 private:
  std::vector<Node> nodes_;
  int max_depth_ = 1;
  int min_leaf_ = 1;
};

/// Greedy CART: each split minimizes the children's summed squared error.
RegressionTree fit_tree(const Dataset& data, const Eigen::VectorXd& y, int max_depth,
                        int min_leaf);

/// A built-in model together with the feature schema it was fitted on.
struct SavedModel {
  std::variant<LinearModel, RegressionTree> model;
  std::vector<FeatureSpec> features;

  PredictFunction predict_function() const;
};

/// {"version":1,"kind":"ols"|"tree","features":[...],...}
std::string save_model(const SavedModel& saved);
/// Throws DataError on malformed or unsupported documents.
SavedModel load_model(std::string_view json_text);

}  // namespace boxplain
