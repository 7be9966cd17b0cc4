#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "boxplain/error.hpp"

namespace boxplain {

enum class ColumnKind { Numeric, Categorical };

std::string_view to_string(ColumnKind kind);

/// A single table cell: a finite real or a categorical level.
using Cell = std::variant<double, std::string>;

ColumnKind kind_of(const Cell& cell);
std::string format_cell(const Cell& cell);

/// Shortest decimal representation that parses back to the same double.
std::string format_number(double value);

class Column {
 public:
  /// Throws DataError if any value is not finite.
  static Column numeric(std::string name, Eigen::VectorXd values);
  static Column categorical(std::string name, std::vector<std::string> values);

  const std::string& name() const { return name_; }
  ColumnKind kind() const { return kind_; }
  bool is_numeric() const { return kind_ == ColumnKind::Numeric; }
  std::size_t size() const;

  const Eigen::VectorXd& numeric() const;
  const std::vector<std::string>& categorical() const;
  // Sorted distinct values of a categorical column.
  const std::vector<std::string>& levels() const;

  Cell cell(std::size_t row) const;

  friend bool operator==(const Column& a, const Column& b);

 private:
  Column() = default;

  std::string name_;
  ColumnKind kind_ = ColumnKind::Numeric;
  Eigen::VectorXd numeric_;
  std::vector<std::string> categorical_;
  std::vector<std::string> levels_;
};

/// Immutable columnar table. Copies share column storage; every "modifying"
/// operation returns a new dataset that replaces only the touched columns.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Column> columns,
                   std::optional<std::string> target = std::nullopt);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return columns_.size(); }

  const Column& column(std::size_t index) const { return *columns_.at(index); }
  const Column& column(std::string_view name) const;
  std::optional<std::size_t> index_of(std::string_view name) const;
  bool has_column(std::string_view name) const { return index_of(name).has_value(); }
  std::vector<std::string> names() const;

  const std::optional<std::string>& target() const { return target_; }
  /// Target values; throws UsageError when no numeric target is recorded.
  Eigen::VectorXd target_values() const;
  /// The dataset without its target column.
  Dataset features() const;
  Dataset without_columns(std::span<const std::string> names) const;

  /// Replaces the column with the same name (kind may change).
  Dataset with_column(Column column) const;
  Dataset take_rows(std::span<const std::size_t> rows) const;
  /// Row-wise concatenation; schemas must match.
  static Dataset concat(std::span<const Dataset> parts);

  /// Same names, order and kinds.
  bool same_schema(const Dataset& other) const;

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  std::vector<std::shared_ptr<const Column>> columns_;
  std::optional<std::string> target_;
  std::size_t rows_ = 0;
};

/// One observation: a value for every feature column, in schema order.
class Observation {
 public:
  Observation() = default;
  explicit Observation(std::vector<std::pair<std::string, Cell>> values)
      : values_(std::move(values)) {}

  /// Row `row` of `data`, target column excluded.
  static Observation from_row(const Dataset& data, std::size_t row);

  const std::vector<std::pair<std::string, Cell>>& values() const { return values_; }
  const Cell& at(std::string_view name) const;
  std::size_t size() const { return values_.size(); }

  /// Throws UsageError naming the first missing/extra/mismatched column.
  void check_schema(const Dataset& data) const;
  /// `copies` identical rows in the column order of `schema`.
  Dataset to_dataset(const Dataset& schema, std::size_t copies = 1) const;

 private:
  std::vector<std::pair<std::string, Cell>> values_;
};

// ---------------------------------------------------------------------------
// CSV

using SchemaHints = std::map<std::string, ColumnKind, std::less<>>;

Dataset load_csv(std::istream& source, std::string_view target,
                 const SchemaHints& hints = {});
Dataset load_csv_file(const std::string& path, std::string_view target,
                      const SchemaHints& hints = {});
/// Reads without recording a target column.
Dataset load_csv_table(std::istream& source, const SchemaHints& hints = {});

/// RFC-4180 output with header, numbers in shortest round-trip form.
void write_csv(std::ostream& out, const Dataset& data);
std::string to_csv(const Dataset& data);

// ---------------------------------------------------------------------------
// Column statistics

/// Type-7 (linear interpolation) sample quantile.
template <typename Derived>
typename Derived::Scalar quantile(const Eigen::DenseBase<Derived>& column, double p) {
  using Scalar = typename Derived::Scalar;
  if (column.size() == 0) throw DataError("quantile of an empty column");
  if (!(p >= 0.0 && p <= 1.0)) throw UsageError("quantile probability outside [0, 1]");
  std::vector<Scalar> sorted(static_cast<std::size_t>(column.size()));
  for (Eigen::Index i = 0; i < column.size(); ++i) sorted[i] = column.derived().coeff(i);
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + static_cast<Scalar>(h - static_cast<double>(lo)) *
                          (sorted[lo + 1] - sorted[lo]);
}

/// Fraction of column values <= v.
template <typename Derived>
double ecdf_position(const Eigen::DenseBase<Derived>& column, double v) {
  if (column.size() == 0) throw DataError("ecdf of an empty column");
  return static_cast<double>((column.derived().array() <= v).count()) /
         static_cast<double>(column.size());
}

/// Mean that is exact when all values are equal.
template <typename Derived>
typename Derived::Scalar stable_mean(const Eigen::DenseBase<Derived>& values) {
  const auto n = values.size();
  if (n == 0) throw UsageError("mean of an empty vector");
  const auto first = values.derived().coeff(0);
  return first + (values.derived().array() - first).sum() /
                     static_cast<typename Derived::Scalar>(n);
}

// ---------------------------------------------------------------------------
// Grids and column manipulation

struct GridStrategy {
  enum class Kind { Uniform, Quantile, Unique };
  Kind kind = Kind::Quantile;
  std::size_t points = 21;

  static GridStrategy uniform(std::size_t k);
  static GridStrategy quantiles(std::size_t k);
  static GridStrategy unique() { return {Kind::Unique, 0}; }
  /// "uniform:K", "quantile:K" or "unique".
  static GridStrategy parse(std::string_view text);
};

std::vector<Cell> make_grid(const Dataset& data, std::string_view variable,
                            const GridStrategy& strategy);
/// make_grid for numeric variables.
Eigen::VectorXd numeric_grid(const Dataset& data, std::string_view variable,
                             const GridStrategy& strategy);

/// The named column set to `value` in every row.
Dataset substitute(const Dataset& data, std::string_view variable, const Cell& value);
/// The named numeric column replaced by per-row `values`.
Dataset replace_values(const Dataset& data, std::string_view variable,
                       const Eigen::VectorXd& values);
/// Fisher-Yates shuffle of one column, keyed by (seed, variable).
Dataset permute_column(const Dataset& data, std::string_view variable,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Deterministic random streams

/// SplitMix64. Platform-independent; bounded draws use rejection sampling.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Uniform in [0, bound).
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

std::uint64_t fnv1a64(std::string_view bytes);
/// Independent stream seed for (seed, key, index).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t index = 0);

}  // namespace boxplain
