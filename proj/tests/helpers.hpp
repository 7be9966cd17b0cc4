#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <unistd.h>
#include <string>
#include <vector>

#include "boxplain/data.hpp"
#include "boxplain/model.hpp"

namespace boxplain::testing {

inline Eigen::VectorXd vec(std::initializer_list<double> values) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (const double v : values) out[i++] = v;
  return out;
}

inline Dataset csv(const std::string& text, std::string_view target = {}) {
  std::istringstream in(text);
  return target.empty() ? load_csv_table(in) : load_csv(in, target);
}

/// Row-wise model from a function of one observation.
inline PredictFunction row_model(std::function<double(const Dataset&, std::size_t)> f,
                                 bool reentrant = true) {
  return {[f = std::move(f)](const Dataset& q) {
            Eigen::VectorXd out(static_cast<Eigen::Index>(q.rows()));
            for (std::size_t i = 0; i < q.rows(); ++i) out[static_cast<Eigen::Index>(i)] = f(q, i);
            return out;
          },
          reentrant};
}

inline double num(const Dataset& q, std::string_view column, std::size_t row) {
  return q.column(column).numeric()[static_cast<Eigen::Index>(row)];
}

/// Linear model a·x + c over the named numeric columns.
inline PredictFunction additive_model(std::vector<std::pair<std::string, double>> terms,
                                      double intercept) {
  return row_model([terms = std::move(terms), intercept](const Dataset& q, std::size_t i) {
    double s = intercept;
    for (const auto& [name, a] : terms) s += a * num(q, name, i);
    return s;
  });
}

inline Explainer make_explainer(PredictFunction f, const Dataset& data,
                                std::string label = "model") {
  Eigen::VectorXd y = data.target() ? data.target_values()
                                    : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.rows()));
  return explain(std::move(f), data, std::move(y), std::move(label));
}

/// Random numeric dataset x1..xp plus target y; with `categorical`, column
/// "d" holds levels a..e.
inline Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t p,
                              bool categorical = false) {
  std::normal_distribution<double> normal;
  std::vector<Column> columns;
  Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < p; ++j) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(n));
    for (auto& v : x) v = normal(rng);
    y += (static_cast<double>(j) + 1.0) * x.array().sin().matrix() + 0.3 * x;
    columns.push_back(Column::numeric("x" + std::to_string(j + 1), x));
  }
  if (categorical) {
    std::uniform_int_distribution<int> level(0, 4);
    std::vector<std::string> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int l = level(rng);
      d[i] = std::string(1, static_cast<char>('a' + l));
      y[static_cast<Eigen::Index>(i)] += l * 0.7;
    }
    columns.push_back(Column::categorical("d", d));
  }
  for (auto& v : y) v += 0.1 * normal(rng);
  columns.push_back(Column::numeric("y", y));
  return Dataset(std::move(columns), "y");
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("boxplain-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& contents) const {
    std::ofstream(file(name), std::ios::binary) << contents;
    return file(name);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

}  // namespace boxplain::testing
