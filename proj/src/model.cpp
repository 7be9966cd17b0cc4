#include "boxplain/model.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "boxplain/json.hpp"
#include "boxplain/parallel.hpp"

namespace boxplain {

namespace {

constexpr std::size_t kProbeRows = 8;

std::string schema_text(const Dataset& data) {
  std::string out;
  for (std::size_t c = 0; c < data.cols(); ++c) {
    if (c) out += ", ";
    out += data.column(c).name();
    out += ':';
    out += to_string(data.column(c).kind());
  }
  return out;
}

Eigen::VectorXd validated(Eigen::VectorXd scores, std::size_t expected) {
  if (static_cast<std::size_t>(scores.size()) != expected) {
    throw ModelAdapterError("expected " + std::to_string(expected) +
                            " predictions, got " + std::to_string(scores.size()));
  }
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw ModelAdapterError("non-finite prediction at row " + std::to_string(i + 1));
    }
  }
  return scores;
}

}  // namespace

std::vector<FeatureSpec> feature_schema(const Dataset& data) {
  std::vector<FeatureSpec> out;
  for (std::size_t c = 0; c < data.cols(); ++c) {
    const auto& column = data.column(c);
    if (data.target() && column.name() == *data.target()) continue;
    out.push_back({column.name(), column.kind()});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Explainer

Explainer Explainer::with_jobs(std::size_t jobs) const {
  Explainer copy = *this;
  copy.jobs_ = std::max<std::size_t>(1, jobs);
  return copy;
}

Eigen::VectorXd Explainer::predict(const Dataset& query) const {
  if (!query.same_schema(data_)) {
    throw UsageError("query schema [" + schema_text(query) +
                     "] does not match explainer schema [" + schema_text(data_) + "]");
  }
  if (query.rows() == 0) return Eigen::VectorXd(0);
  if (predict_.reentrant) return validated(predict_.fn(query), query.rows());
  std::lock_guard<std::mutex> lock(*gate_);
  return validated(predict_.fn(query), query.rows());
}

std::vector<Eigen::VectorXd> Explainer::predict_each(
    std::size_t count, const std::function<Dataset(std::size_t)>& make_query,
    const std::function<std::string(std::size_t)>& describe) const {
  std::vector<Eigen::VectorXd> out(count);
  const std::size_t jobs = predict_.reentrant ? jobs_ : 1;
  detail::parallel_for(count, jobs, [&](std::size_t i) {
    try {
      out[i] = predict(make_query(i));
    } catch (const ModelAdapterError& error) {
      if (!describe) throw;
      throw ModelAdapterError(describe(i) + ": " + error.what());
    }
  });
  return out;
}

Explainer explain(PredictFunction predict, Dataset data, Eigen::VectorXd y,
                  std::string label) {
  if (!predict.fn) throw UsageError("explain: empty predict function");
  if (label.empty()) throw UsageError("explain: label must not be empty");
  Dataset features = data.features();
  if (static_cast<std::size_t>(y.size()) != features.rows()) {
    throw UsageError("explain: y has " + std::to_string(y.size()) + " values but data has " +
                     std::to_string(features.rows()) + " rows");
  }
  Explainer explainer;
  explainer.predict_ = std::move(predict);
  explainer.data_ = std::move(features);
  explainer.y_ = std::move(y);
  explainer.label_ = std::move(label);
  explainer.gate_ = std::make_shared<std::mutex>();

  const std::size_t probe = std::min(explainer.data_.rows(), kProbeRows);
  std::vector<std::size_t> rows(probe);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  try {
    explainer.predict(explainer.data_.take_rows(rows));
  } catch (const ModelAdapterError& error) {
    throw ModelAdapterError("model '" + explainer.label_ + "' failed its probe: " +
                            error.what());
  }
  return explainer;
}

Eigen::VectorXd predict_batch(const Explainer& explainer, const Dataset& query) {
  return explainer.predict(query);
}

// ---------------------------------------------------------------------------
// LinearModel

double LinearModel::coefficient(std::string_view variable) const {
  for (const auto& term : terms_) {
    if (const auto* numeric = std::get_if<NumericTerm>(&term);
        numeric && numeric->variable == variable) {
      return numeric->coefficient;
    }
  }
  throw UsageError("no numeric term '" + std::string(variable) + "'");
}

Eigen::VectorXd LinearModel::predict(const Dataset& query) const {
  const auto n = static_cast<Eigen::Index>(query.rows());
  Eigen::VectorXd out = Eigen::VectorXd::Constant(n, intercept_);
  for (const auto& term : terms_) {
    if (const auto* numeric = std::get_if<NumericTerm>(&term)) {
      const auto& x = query.column(numeric->variable).numeric();
      for (Eigen::Index i = 0; i < n; ++i) out[i] += numeric->coefficient * x[i];
      continue;
    }
    const auto& categorical = std::get<CategoricalTerm>(term);
    const auto& values = query.column(categorical.variable).categorical();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& level = values[static_cast<std::size_t>(i)];
      if (level == categorical.reference) continue;
      const auto it = categorical.offsets.find(level);
      if (it == categorical.offsets.end()) {
        throw ModelAdapterError("level '" + level + "' of '" + categorical.variable +
                                "' was not seen when fitting");
      }
      out[i] += it->second;
    }
  }
  return out;
}

PredictFunction LinearModel::predict_function() const {
  auto model = std::make_shared<const LinearModel>(*this);
  return {[model](const Dataset& query) { return model->predict(query); }, true};
}

LinearModel fit_linear(const Dataset& data, const Eigen::VectorXd& y) {
  const Dataset features = data.features();
  const auto n = static_cast<Eigen::Index>(features.rows());
  if (y.size() != n) throw UsageError("fit_linear: y length does not match data");

  std::vector<std::string> design_names{"(intercept)"};
  std::vector<Eigen::VectorXd> design_columns{Eigen::VectorXd::Ones(n)};
  for (std::size_t c = 0; c < features.cols(); ++c) {
    const auto& column = features.column(c);
    if (column.is_numeric()) {
      design_names.push_back(column.name());
      design_columns.push_back(column.numeric());
      continue;
    }
    const auto& levels = column.levels();
    for (std::size_t l = 1; l < levels.size(); ++l) {
      Eigen::VectorXd dummy(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        dummy[i] = column.categorical()[static_cast<std::size_t>(i)] == levels[l] ? 1.0 : 0.0;
      }
      design_names.push_back(column.name() + "=" + levels[l]);
      design_columns.push_back(std::move(dummy));
    }
  }
  const auto p = static_cast<Eigen::Index>(design_columns.size());
  if (n <= p) {
    throw FitError("fit_linear: " + std::to_string(n) + " rows cannot determine " +
                   std::to_string(p) + " parameters");
  }
  Eigen::MatrixXd design(n, p);
  for (Eigen::Index j = 0; j < p; ++j) design.col(j) = design_columns[static_cast<std::size_t>(j)];

  constexpr double kRankThreshold = 1e-9;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(kRankThreshold);
  if (qr.rank() < p) {
    // The first prefix of columns that loses rank names the culprit.
    for (Eigen::Index k = 1; k <= p; ++k) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> prefix(design.leftCols(k));
      prefix.setThreshold(kRankThreshold);
      if (prefix.rank() < k) {
        throw FitError("fit_linear: design is rank deficient at column '" +
                       design_names[static_cast<std::size_t>(k - 1)] + "'");
      }
    }
    throw FitError("fit_linear: design is rank deficient");
  }
  const Eigen::VectorXd beta = qr.solve(y);

  std::vector<LinearModel::Term> terms;
  Eigen::Index next = 1;
  for (std::size_t c = 0; c < features.cols(); ++c) {
    const auto& column = features.column(c);
    if (column.is_numeric()) {
      terms.emplace_back(LinearModel::NumericTerm{column.name(), beta[next++]});
      continue;
    }
    LinearModel::CategoricalTerm term{column.name(), column.levels().front(), {}};
    for (std::size_t l = 1; l < column.levels().size(); ++l) {
      term.offsets[column.levels()[l]] = beta[next++];
    }
    terms.emplace_back(std::move(term));
  }
  return LinearModel(beta[0], std::move(terms));
}

// ---------------------------------------------------------------------------
// RegressionTree

namespace {

// Exact when all values are equal, so pure leaves reproduce their targets.
double subset_mean(const Eigen::VectorXd& y, const std::vector<std::size_t>& rows) {
  const double first = y[static_cast<Eigen::Index>(rows.front())];
  double acc = 0.0;
  for (const auto row : rows) acc += y[static_cast<Eigen::Index>(row)] - first;
  return first + acc / static_cast<double>(rows.size());
}

struct Split {
  double gain = 0.0;
  std::size_t column = 0;
  bool categorical = false;
  double threshold = 0.0;
  std::vector<std::string> left_levels;
};

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const Eigen::VectorXd& y, int max_depth, int min_leaf)
      : data_(data), y_(y), max_depth_(max_depth), min_leaf_(static_cast<std::size_t>(min_leaf)) {}

  std::vector<RegressionTree::Node> build() {
    std::vector<std::size_t> rows(data_.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grow(rows, 0);
    return std::move(nodes_);
  }

 private:
  int grow(const std::vector<std::size_t>& rows, int depth) {
    const int index = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const double mean = subset_mean(y_, rows);
    nodes_[index].value = mean;
    nodes_[index].count = rows.size();

    if (depth >= max_depth_ || rows.size() < 2 * min_leaf_) return index;
    double parent_sse = 0.0;
    for (const auto row : rows) {
      const double d = y_[static_cast<Eigen::Index>(row)] - mean;
      parent_sse += d * d;
    }
    if (parent_sse <= 0.0) return index;

    Split best;
    for (std::size_t c = 0; c < data_.cols(); ++c) {
      if (data_.column(c).is_numeric()) {
        numeric_split(rows, c, mean, parent_sse, best);
      } else {
        categorical_split(rows, c, mean, parent_sse, best);
      }
    }
    if (best.gain <= parent_sse * 1e-12) return index;

    const auto& column = data_.column(best.column);
    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (const auto row : rows) {
      bool goes_left;
      if (best.categorical) {
        goes_left = std::binary_search(best.left_levels.begin(), best.left_levels.end(),
                                       column.categorical()[row]);
      } else {
        goes_left = column.numeric()[static_cast<Eigen::Index>(row)] < best.threshold;
      }
      (goes_left ? left : right).push_back(row);
    }
    nodes_[index].variable = column.name();
    nodes_[index].categorical = best.categorical;
    nodes_[index].threshold = best.threshold;
    nodes_[index].left_levels = best.left_levels;
    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    nodes_[index].left = l;
    nodes_[index].right = r;
    return index;
  }

  void numeric_split(const std::vector<std::size_t>& rows, std::size_t c, double mean,
                     double parent_sse, Split& best) const {
    const auto& x = data_.column(c).numeric();
    std::vector<std::size_t> order = rows;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return x[static_cast<Eigen::Index>(a)] < x[static_cast<Eigen::Index>(b)];
    });
    const std::size_t n = order.size();
    double total_sum = 0.0;
    double total_sq = 0.0;
    for (const auto row : order) {
      const double d = y_[static_cast<Eigen::Index>(row)] - mean;
      total_sum += d;
      total_sq += d * d;
    }
    double left_sum = 0.0;
    double left_sq = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double d = y_[static_cast<Eigen::Index>(order[i])] - mean;
      left_sum += d;
      left_sq += d * d;
      const std::size_t n_left = i + 1;
      const std::size_t n_right = n - n_left;
      if (n_left < min_leaf_ || n_right < min_leaf_) continue;
      const double lo = x[static_cast<Eigen::Index>(order[i])];
      const double hi = x[static_cast<Eigen::Index>(order[i + 1])];
      if (!(lo < hi)) continue;
      const double right_sum = total_sum - left_sum;
      const double right_sq = total_sq - left_sq;
      const double sse = (left_sq - left_sum * left_sum / static_cast<double>(n_left)) +
                         (right_sq - right_sum * right_sum / static_cast<double>(n_right));
      const double gain = parent_sse - sse;
      if (gain > best.gain) {
        double threshold = lo + (hi - lo) / 2.0;
        if (!(threshold > lo)) threshold = hi;
        best = Split{gain, c, false, threshold, {}};
      }
    }
  }

  void categorical_split(const std::vector<std::size_t>& rows, std::size_t c, double mean,
                         double parent_sse, Split& best) const {
    const auto& values = data_.column(c).categorical();
    struct LevelStats {
      std::string level;
      std::size_t count = 0;
      double sum = 0.0;
      double sq = 0.0;
    };
    std::map<std::string, LevelStats> by_level;
    for (const auto row : rows) {
      auto& stats = by_level[values[row]];
      stats.level = values[row];
      const double d = y_[static_cast<Eigen::Index>(row)] - mean;
      ++stats.count;
      stats.sum += d;
      stats.sq += d * d;
    }
    std::vector<LevelStats> levels;
    for (auto& [_, stats] : by_level) levels.push_back(std::move(stats));
    if (levels.size() < 2) return;
    std::stable_sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) {
      return a.sum / static_cast<double>(a.count) < b.sum / static_cast<double>(b.count);
    });
    const std::size_t n = rows.size();
    double total_sum = 0.0;
    double total_sq = 0.0;
    for (const auto& level : levels) {
      total_sum += level.sum;
      total_sq += level.sq;
    }
    std::size_t n_left = 0;
    double left_sum = 0.0;
    double left_sq = 0.0;
    for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
      n_left += levels[k].count;
      left_sum += levels[k].sum;
      left_sq += levels[k].sq;
      const std::size_t n_right = n - n_left;
      if (n_left < min_leaf_ || n_right < min_leaf_) continue;
      const double right_sum = total_sum - left_sum;
      const double right_sq = total_sq - left_sq;
      const double sse = (left_sq - left_sum * left_sum / static_cast<double>(n_left)) +
                         (right_sq - right_sum * right_sum / static_cast<double>(n_right));
      const double gain = parent_sse - sse;
      if (gain > best.gain) {
        std::vector<std::string> left;
        for (std::size_t m = 0; m <= k; ++m) left.push_back(levels[m].level);
        std::sort(left.begin(), left.end());
        best = Split{gain, c, true, 0.0, std::move(left)};
      }
    }
  }

  const Dataset& data_;
  const Eigen::VectorXd& y_;
  int max_depth_;
  std::size_t min_leaf_;
  std::vector<RegressionTree::Node> nodes_;
};

}  // namespace

RegressionTree fit_tree(const Dataset& data, const Eigen::VectorXd& y, int max_depth,
                        int min_leaf) {
  if (max_depth < 1) throw UsageError("fit_tree: max_depth must be >= 1");
  if (min_leaf < 1) throw UsageError("fit_tree: min_leaf must be >= 1");
  const Dataset features = data.features();
  if (static_cast<std::size_t>(y.size()) != features.rows()) {
    throw UsageError("fit_tree: y length does not match data");
  }
  if (features.rows() == 0) throw DataError("fit_tree: no rows");
  TreeBuilder builder(features, y, max_depth, min_leaf);
  return RegressionTree(builder.build(), max_depth, min_leaf);
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.left < 0; }));
}

int RegressionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<int> depth(nodes_.size(), 0);
  int deepest = 0;
  // Children are always stored after their parent.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, depth[i]);
    if (nodes_[i].left >= 0) {
      depth[static_cast<std::size_t>(nodes_[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes_[i].right)] = depth[i] + 1;
    }
  }
  return deepest;
}

Eigen::VectorXd RegressionTree::predict(const Dataset& query) const {
  if (nodes_.empty()) throw UsageError("predict: empty tree");
  std::map<std::string, const Column*, std::less<>> columns;
  for (const auto& node : nodes_) {
    if (node.left >= 0 && !columns.contains(node.variable)) {
      const auto& column = query.column(node.variable);
      if (column.is_numeric() == node.categorical) {
        throw UsageError("predict: column '" + node.variable + "' has the wrong kind");
      }
      columns.emplace(node.variable, &column);
    }
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(query.rows()));
  for (std::size_t row = 0; row < query.rows(); ++row) {
    const Node* node = &nodes_.front();
    while (node->left >= 0) {
      const Column& column = *columns.find(node->variable)->second;
      bool goes_left;
      if (node->categorical) {
        goes_left = std::binary_search(node->left_levels.begin(), node->left_levels.end(),
                                       column.categorical()[row]);
      } else {
        goes_left = column.numeric()[static_cast<Eigen::Index>(row)] < node->threshold;
      }
      node = &nodes_[static_cast<std::size_t>(goes_left ? node->left : node->right)];
    }
    out[static_cast<Eigen::Index>(row)] = node->value;
  }
  return out;
}

PredictFunction RegressionTree::predict_function() const {
  auto model = std::make_shared<const RegressionTree>(*this);
  return {[model](const Dataset& query) { return model->predict(query); }, true};
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr int kModelFormatVersion = 1;

Json linear_json(const LinearModel& model) {
  Json terms = Json::array();
  for (const auto& term : model.terms()) {
    if (const auto* numeric = std::get_if<LinearModel::NumericTerm>(&term)) {
      terms.push_back({{"variable", numeric->variable},
                       {"kind", "numeric"},
                       {"coefficient", numeric->coefficient}});
    } else {
      const auto& categorical = std::get<LinearModel::CategoricalTerm>(term);
      Json offsets = Json::object();
      for (const auto& [level, offset] : categorical.offsets) offsets[level] = offset;
      terms.push_back({{"variable", categorical.variable},
                       {"kind", "categorical"},
                       {"reference", categorical.reference},
                       {"offsets", offsets}});
    }
  }
  return {{"kind", "ols"}, {"intercept", model.intercept()}, {"terms", terms}};
}

Json tree_json(const RegressionTree& tree) {
  Json nodes = Json::array();
  for (const auto& node : tree.nodes()) {
    Json entry = {{"value", node.value}, {"count", node.count}};
    if (node.left >= 0) {
      entry["left"] = node.left;
      entry["right"] = node.right;
      entry["variable"] = node.variable;
      if (node.categorical) {
        entry["left_levels"] = node.left_levels;
      } else {
        entry["threshold"] = node.threshold;
      }
    }
    nodes.push_back(std::move(entry));
  }
  return {{"kind", "tree"},
          {"max_depth", tree.max_depth()},
          {"min_leaf", tree.min_leaf()},
          {"nodes", nodes}};
}

LinearModel linear_from_json(const Json& doc) {
  std::vector<LinearModel::Term> terms;
  for (const auto& term : doc.at("terms")) {
    if (term.at("kind") == "numeric") {
      terms.emplace_back(LinearModel::NumericTerm{term.at("variable").get<std::string>(),
                                                  term.at("coefficient").get<double>()});
    } else {
      LinearModel::CategoricalTerm categorical{term.at("variable").get<std::string>(),
                                               term.at("reference").get<std::string>(),
                                               {}};
      for (const auto& [level, offset] : term.at("offsets").items()) {
        categorical.offsets[level] = offset.get<double>();
      }
      terms.emplace_back(std::move(categorical));
    }
  }
  return LinearModel(doc.at("intercept").get<double>(), std::move(terms));
}

RegressionTree tree_from_json(const Json& doc) {
  std::vector<RegressionTree::Node> nodes;
  for (const auto& entry : doc.at("nodes")) {
    RegressionTree::Node node;
    node.value = entry.at("value").get<double>();
    node.count = entry.at("count").get<std::size_t>();
    if (entry.contains("left")) {
      node.left = entry.at("left").get<int>();
      node.right = entry.at("right").get<int>();
      node.variable = entry.at("variable").get<std::string>();
      if (entry.contains("left_levels")) {
        node.categorical = true;
        node.left_levels = entry.at("left_levels").get<std::vector<std::string>>();
        std::sort(node.left_levels.begin(), node.left_levels.end());
      } else {
        node.threshold = entry.at("threshold").get<double>();
      }
    }
    nodes.push_back(std::move(node));
  }
  const auto count = static_cast<int>(nodes.size());
  if (count == 0) throw DataError("model file: tree has no nodes");
  for (int i = 0; i < count; ++i) {
    const auto& node = nodes[static_cast<std::size_t>(i)];
    if (node.left >= 0 && (node.left <= i || node.right <= i || node.left >= count ||
                           node.right >= count)) {
      throw DataError("model file: bad child index at node " + std::to_string(i));
    }
  }
  return RegressionTree(std::move(nodes), doc.at("max_depth").get<int>(),
                        doc.at("min_leaf").get<int>());
}

}  // namespace

std::string LinearModel::to_json() const { return canonical_json(linear_json(*this)); }

std::string RegressionTree::to_json() const { return canonical_json(tree_json(*this)); }

PredictFunction SavedModel::predict_function() const {
  return std::visit([](const auto& m) { return m.predict_function(); }, model);
}

std::string save_model(const SavedModel& saved) {
  Json doc = std::visit(
      [](const auto& m) {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LinearModel>) {
          return linear_json(m);
        } else {
          return tree_json(m);
        }
      },
      saved.model);
  Json features = Json::array();
  for (const auto& feature : saved.features) {
    features.push_back({{"name", feature.name}, {"kind", std::string(to_string(feature.kind))}});
  }
  doc["version"] = kModelFormatVersion;
  doc["features"] = features;
  return canonical_json(doc);
}

SavedModel load_model(std::string_view json_text) {
  try {
    const Json doc = Json::parse(json_text);
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw DataError("model file: unsupported version " + doc.at("version").dump());
    }
    SavedModel saved;
    for (const auto& feature : doc.at("features")) {
      const auto kind = feature.at("kind").get<std::string>();
      if (kind != "numeric" && kind != "categorical") {
        throw DataError("model file: unknown feature kind '" + kind + "'");
      }
      saved.features.push_back({feature.at("name").get<std::string>(),
                                kind == "numeric" ? ColumnKind::Numeric
                                                  : ColumnKind::Categorical});
    }
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "ols") {
      saved.model = linear_from_json(doc);
    } else if (kind == "tree") {
      saved.model = tree_from_json(doc);
    } else {
      throw DataError("model file: unknown kind '" + kind + "'");
    }
    return saved;
  } catch (const Json::exception& error) {
    throw DataError(std::string("model file: ") + error.what());
  }
}

}  // namespace boxplain
