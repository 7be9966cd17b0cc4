#include "boxplain/data.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace boxplain {

std::string_view to_string(ColumnKind kind) {
  return kind == ColumnKind::Numeric ? "numeric" : "categorical";
}

ColumnKind kind_of(const Cell& cell) {
  return std::holds_alternative<double>(cell) ? ColumnKind::Numeric
                                              : ColumnKind::Categorical;
}

std::string format_number(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::string format_cell(const Cell& cell) {
  if (const auto* number = std::get_if<double>(&cell)) return format_number(*number);
  return std::get<std::string>(cell);
}

// ---------------------------------------------------------------------------
// Column

Column Column::numeric(std::string name, Eigen::VectorXd values) {
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw DataError("column '" + name + "' row " + std::to_string(i + 1) +
                      ": non-finite value");
    }
  }
  Column column;
  column.name_ = std::move(name);
  column.kind_ = ColumnKind::Numeric;
  column.numeric_ = std::move(values);
  return column;
}

Column Column::categorical(std::string name, std::vector<std::string> values) {
  Column column;
  column.name_ = std::move(name);
  column.kind_ = ColumnKind::Categorical;
  std::set<std::string> distinct(values.begin(), values.end());
  column.levels_.assign(distinct.begin(), distinct.end());
  column.categorical_ = std::move(values);
  return column;
}

std::size_t Column::size() const {
  return is_numeric() ? static_cast<std::size_t>(numeric_.size()) : categorical_.size();
}

const Eigen::VectorXd& Column::numeric() const {
  if (!is_numeric()) throw UsageError("column '" + name_ + "' is categorical");
  return numeric_;
}

const std::vector<std::string>& Column::categorical() const {
  if (is_numeric()) throw UsageError("column '" + name_ + "' is numeric");
  return categorical_;
}

const std::vector<std::string>& Column::levels() const {
  if (is_numeric()) throw UsageError("column '" + name_ + "' is numeric");
  return levels_;
}

Cell Column::cell(std::size_t row) const {
  if (is_numeric()) return numeric_[static_cast<Eigen::Index>(row)];
  return categorical_[row];
}

bool operator==(const Column& a, const Column& b) {
  if (a.name_ != b.name_ || a.kind_ != b.kind_) return false;
  if (a.is_numeric()) {
    return a.numeric_.size() == b.numeric_.size() &&
           std::equal(a.numeric_.begin(), a.numeric_.end(), b.numeric_.begin());
  }
  return a.categorical_ == b.categorical_;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<Column> columns, std::optional<std::string> target)
    : target_(std::move(target)) {
  std::set<std::string, std::less<>> seen;
  for (auto& column : columns) {
    if (!seen.insert(column.name()).second) {
      throw DataError("duplicate column name '" + column.name() + "'");
    }
    if (!columns_.empty() && column.size() != rows_) {
      throw DataError("column '" + column.name() + "' has " +
                      std::to_string(column.size()) + " rows, expected " +
                      std::to_string(rows_));
    }
    rows_ = column.size();
    columns_.push_back(std::make_shared<const Column>(std::move(column)));
  }
  if (target_ && !seen.contains(*target_)) {
    throw DataError("target column '" + *target_ + "' not found");
  }
}

const Column& Dataset::column(std::string_view name) const {
  const auto index = index_of(name);
  if (!index) throw UsageError("unknown variable '" + std::string(name) + "'");
  return *columns_[*index];
}

std::optional<std::size_t> Dataset::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i]->name() == name) return i;
  }
  return std::nullopt;
}

std::vector<std::string> Dataset::names() const {
  std::vector<std::string> out;
  out.reserve(columns_.size());
  for (const auto& column : columns_) out.push_back(column->name());
  return out;
}

Eigen::VectorXd Dataset::target_values() const {
  if (!target_) throw UsageError("dataset has no target column");
  const auto& column = this->column(*target_);
  if (!column.is_numeric()) {
    throw DataError("target column '" + *target_ + "' is not numeric");
  }
  return column.numeric();
}

Dataset Dataset::features() const {
  if (!target_) return *this;
  const std::string names[] = {*target_};
  return without_columns(names);
}

Dataset Dataset::without_columns(std::span<const std::string> drop) const {
  Dataset out;
  out.rows_ = rows_;
  for (const auto& column : columns_) {
    if (std::find(drop.begin(), drop.end(), column->name()) == drop.end()) {
      out.columns_.push_back(column);
    }
  }
  if (target_ && std::find(drop.begin(), drop.end(), *target_) == drop.end()) {
    out.target_ = target_;
  }
  return out;
}

Dataset Dataset::with_column(Column column) const {
  const auto index = index_of(column.name());
  if (!index) throw UsageError("unknown variable '" + column.name() + "'");
  if (column.size() != rows_) throw UsageError("replacement column has wrong length");
  Dataset out = *this;
  out.columns_[*index] = std::make_shared<const Column>(std::move(column));
  return out;
}

Dataset Dataset::take_rows(std::span<const std::size_t> rows) const {
  std::vector<Column> columns;
  columns.reserve(columns_.size());
  for (const auto& column : columns_) {
    if (column->is_numeric()) {
      Eigen::VectorXd values(static_cast<Eigen::Index>(rows.size()));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        values[static_cast<Eigen::Index>(i)] =
            column->numeric()[static_cast<Eigen::Index>(rows[i])];
      }
      columns.push_back(Column::numeric(column->name(), std::move(values)));
    } else {
      std::vector<std::string> values;
      values.reserve(rows.size());
      for (const auto row : rows) values.push_back(column->categorical().at(row));
      columns.push_back(Column::categorical(column->name(), std::move(values)));
    }
  }
  Dataset out(std::move(columns), target_);
  out.rows_ = rows.size();
  return out;
}

Dataset Dataset::concat(std::span<const Dataset> parts) {
  if (parts.empty()) return {};
  const Dataset& first = parts.front();
  std::size_t total = 0;
  for (const auto& part : parts) {
    if (!part.same_schema(first)) throw UsageError("concat: schema mismatch");
    total += part.rows();
  }
  std::vector<Column> columns;
  for (std::size_t c = 0; c < first.cols(); ++c) {
    const auto& name = first.column(c).name();
    if (first.column(c).is_numeric()) {
      Eigen::VectorXd values(static_cast<Eigen::Index>(total));
      Eigen::Index offset = 0;
      for (const auto& part : parts) {
        const auto& src = part.column(c).numeric();
        values.segment(offset, src.size()) = src;
        offset += src.size();
      }
      columns.push_back(Column::numeric(name, std::move(values)));
    } else {
      std::vector<std::string> values;
      values.reserve(total);
      for (const auto& part : parts) {
        const auto& src = part.column(c).categorical();
        values.insert(values.end(), src.begin(), src.end());
      }
      columns.push_back(Column::categorical(name, std::move(values)));
    }
  }
  Dataset out(std::move(columns), first.target_);
  out.rows_ = total;
  return out;
}

bool Dataset::same_schema(const Dataset& other) const {
  if (cols() != other.cols()) return false;
  for (std::size_t i = 0; i < cols(); ++i) {
    if (column(i).name() != other.column(i).name() ||
        column(i).kind() != other.column(i).kind()) {
      return false;
    }
  }
  return true;
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.rows_ != b.rows_ || a.target_ != b.target_ || a.cols() != b.cols()) return false;
  for (std::size_t i = 0; i < a.cols(); ++i) {
    if (a.columns_[i] != b.columns_[i] && !(*a.columns_[i] == *b.columns_[i])) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Observation

Observation Observation::from_row(const Dataset& data, std::size_t row) {
  if (row >= data.rows()) {
    throw UsageError("index " + std::to_string(row) + " out of range 0.." +
                     std::to_string(data.rows() == 0 ? 0 : data.rows() - 1));
  }
  std::vector<std::pair<std::string, Cell>> values;
  for (std::size_t c = 0; c < data.cols(); ++c) {
    const auto& column = data.column(c);
    if (data.target() && column.name() == *data.target()) continue;
    values.emplace_back(column.name(), column.cell(row));
  }
  return Observation(std::move(values));
}

const Cell& Observation::at(std::string_view name) const {
  for (const auto& [key, value] : values_) {
    if (key == name) return value;
  }
  throw UsageError("observation has no value for '" + std::string(name) + "'");
}

void Observation::check_schema(const Dataset& data) const {
  for (std::size_t c = 0; c < data.cols(); ++c) {
    const auto& column = data.column(c);
    if (data.target() && column.name() == *data.target()) continue;
    const auto it = std::find_if(values_.begin(), values_.end(),
                                 [&](const auto& kv) { return kv.first == column.name(); });
    if (it == values_.end()) {
      throw UsageError("observation is missing column '" + column.name() + "'");
    }
    if (kind_of(it->second) != column.kind()) {
      throw UsageError("observation column '" + column.name() + "' should be " +
                       std::string(to_string(column.kind())));
    }
  }
  for (const auto& [name, value] : values_) {
    if (!data.has_column(name) || (data.target() && name == *data.target())) {
      throw UsageError("observation has extra column '" + name + "'");
    }
  }
}

Dataset Observation::to_dataset(const Dataset& schema, std::size_t copies) const {
  check_schema(schema);
  std::vector<Column> columns;
  for (std::size_t c = 0; c < schema.cols(); ++c) {
    const auto& name = schema.column(c).name();
    if (schema.target() && name == *schema.target()) continue;
    const Cell& value = at(name);
    if (const auto* number = std::get_if<double>(&value)) {
      columns.push_back(Column::numeric(
          name, Eigen::VectorXd::Constant(static_cast<Eigen::Index>(copies), *number)));
    } else {
      columns.push_back(Column::categorical(
          name, std::vector<std::string>(copies, std::get<std::string>(value))));
    }
  }
  return Dataset(std::move(columns));
}

// ---------------------------------------------------------------------------
// CSV

namespace {

using Record = std::vector<std::string>;

// RFC 4180 record reader. Quoted fields may span lines.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  bool next(Record& record) {
    record.clear();
    int ch = in_.get();
    if (ch == EOF) return false;
    std::string field;
    bool quoted = false;
    bool after_quote = false;
    for (;; ch = in_.get()) {
      if (quoted) {
        if (ch == EOF) throw DataError("unterminated quoted field");
        if (ch == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
            after_quote = true;
          }
        } else {
          field.push_back(static_cast<char>(ch));
        }
        continue;
      }
      if (ch == EOF || ch == '\n' || ch == '\r') {
        if (ch == '\r' && in_.peek() == '\n') in_.get();
        record.push_back(std::move(field));
        return true;
      }
      if (ch == ',') {
        record.push_back(std::move(field));
        field.clear();
        after_quote = false;
      } else if (ch == '"' && field.empty() && !after_quote) {
        quoted = true;
      } else {
        if (after_quote) throw DataError("unexpected character after closing quote");
        field.push_back(static_cast<char>(ch));
      }
    }
  }

 private:
  std::istream& in_;
};

std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, value);
  if (result.ec != std::errc() || result.ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

bool is_blank(const Record& record) {
  return record.size() == 1 && record.front().empty();
}

Dataset read_table(std::istream& source, std::optional<std::string_view> target,
                   const SchemaHints& hints) {
  CsvReader reader(source);
  Record header;
  if (!reader.next(header) || is_blank(header)) throw DataError("empty CSV input");

  std::vector<Record> rows;
  Record record;
  std::size_t row_number = 0;
  while (reader.next(record)) {
    ++row_number;
    if (is_blank(record)) continue;
    if (record.size() != header.size()) {
      throw DataError("row " + std::to_string(row_number) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(record.size()));
    }
    rows.push_back(record);
  }
  if (rows.empty()) throw DataError("CSV has a header but no data rows");
  if (target && std::find(header.begin(), header.end(), *target) == header.end()) {
    throw DataError("target column '" + std::string(*target) + "' not found in header");
  }
  for (const auto& [name, kind] : hints) {
    if (std::find(header.begin(), header.end(), name) == header.end()) {
      throw DataError("schema hint for unknown column '" + name + "'");
    }
  }

  std::vector<Column> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& name = header[c];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r][c].empty()) {
        throw DataError("missing value at row " + std::to_string(r + 1) + ", column '" +
                        name + "'");
      }
    }
    std::optional<ColumnKind> kind;
    if (const auto hint = hints.find(name); hint != hints.end()) kind = hint->second;

    Eigen::VectorXd values(static_cast<Eigen::Index>(rows.size()));
    bool numeric = true;
    for (std::size_t r = 0; r < rows.size() && numeric; ++r) {
      const auto parsed = parse_number(rows[r][c]);
      if (parsed) {
        values[static_cast<Eigen::Index>(r)] = *parsed;
      } else if (kind == ColumnKind::Numeric) {
        throw DataError("row " + std::to_string(r + 1) + ", column '" + name +
                        "': cannot parse '" + rows[r][c] + "' as a number");
      } else {
        numeric = false;
      }
    }
    if (numeric && kind != ColumnKind::Categorical) {
      columns.push_back(Column::numeric(name, std::move(values)));
    } else {
      std::vector<std::string> cells;
      cells.reserve(rows.size());
      for (const auto& row : rows) cells.push_back(row[c]);
      columns.push_back(Column::categorical(name, std::move(cells)));
    }
  }
  std::optional<std::string> target_name;
  if (target) target_name = std::string(*target);
  return Dataset(std::move(columns), std::move(target_name));
}

void write_field(std::ostream& out, std::string_view text) {
  if (text.find_first_of(",\"\r\n") == std::string_view::npos) {
    out << text;
    return;
  }
  out << '"';
  for (const char ch : text) {
    if (ch == '"') out << '"';
    out << ch;
  }
  out << '"';
}

}  // namespace

Dataset load_csv(std::istream& source, std::string_view target, const SchemaHints& hints) {
  return read_table(source, target, hints);
}

Dataset load_csv_table(std::istream& source, const SchemaHints& hints) {
  return read_table(source, std::nullopt, hints);
}

Dataset load_csv_file(const std::string& path, std::string_view target,
                      const SchemaHints& hints) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_csv(in, target, hints);
}

void write_csv(std::ostream& out, const Dataset& data) {
  for (std::size_t c = 0; c < data.cols(); ++c) {
    if (c) out << ',';
    write_field(out, data.column(c).name());
  }
  out << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < data.cols(); ++c) {
      if (c) out << ',';
      const auto& column = data.column(c);
      if (column.is_numeric()) {
        out << format_number(column.numeric()[static_cast<Eigen::Index>(r)]);
      } else {
        write_field(out, column.categorical()[r]);
      }
    }
    out << '\n';
  }
}

std::string to_csv(const Dataset& data) {
  std::ostringstream out;
  write_csv(out, data);
  return out.str();
}

// ---------------------------------------------------------------------------
// Grids

GridStrategy GridStrategy::uniform(std::size_t k) {
  if (k < 2) throw UsageError("uniform grid needs at least 2 points");
  return {Kind::Uniform, k};
}

GridStrategy GridStrategy::quantiles(std::size_t k) {
  if (k < 2) throw UsageError("quantile grid needs at least 2 points");
  return {Kind::Quantile, k};
}

GridStrategy GridStrategy::parse(std::string_view text) {
  if (text == "unique") return unique();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw UsageError("grid must be uniform:K, quantile:K or unique");
  }
  const auto name = text.substr(0, colon);
  const auto count_text = text.substr(colon + 1);
  std::size_t k = 0;
  const auto result =
      std::from_chars(count_text.data(), count_text.data() + count_text.size(), k);
  if (result.ec != std::errc() || result.ptr != count_text.data() + count_text.size()) {
    throw UsageError("bad grid size '" + std::string(count_text) + "'");
  }
  if (name == "uniform") return uniform(k);
  if (name == "quantile") return quantiles(k);
  throw UsageError("unknown grid strategy '" + std::string(name) + "'");
}

Eigen::VectorXd numeric_grid(const Dataset& data, std::string_view variable,
                             const GridStrategy& strategy) {
  const auto& column = data.column(variable);
  if (!column.is_numeric()) {
    throw UsageError("variable '" + std::string(variable) + "' is categorical");
  }
  const Eigen::VectorXd& values = column.numeric();
  if (values.size() == 0) throw DataError("grid over an empty column");

  std::vector<double> points;
  switch (strategy.kind) {
    case GridStrategy::Kind::Uniform: {
      const double lo = values.minCoeff();
      const double hi = values.maxCoeff();
      const auto k = strategy.points;
      for (std::size_t i = 0; i < k; ++i) {
        points.push_back(i + 1 == k ? hi
                                    : lo + (hi - lo) * static_cast<double>(i) /
                                               static_cast<double>(k - 1));
      }
      break;
    }
    case GridStrategy::Kind::Quantile: {
      const auto k = strategy.points;
      for (std::size_t i = 0; i < k; ++i) {
        points.push_back(
            quantile(values, static_cast<double>(i) / static_cast<double>(k - 1)));
      }
      break;
    }
    case GridStrategy::Kind::Unique:
      points.assign(values.begin(), values.end());
      std::sort(points.begin(), points.end());
      break;
  }
  // Quantiles are nondecreasing in p, so adjacent dedup suffices.
  points.erase(std::unique(points.begin(), points.end()), points.end());
  return Eigen::Map<const Eigen::VectorXd>(points.data(),
                                           static_cast<Eigen::Index>(points.size()));
}

std::vector<Cell> make_grid(const Dataset& data, std::string_view variable,
                            const GridStrategy& strategy) {
  const auto& column = data.column(variable);
  std::vector<Cell> out;
  if (!column.is_numeric()) {
    if (strategy.kind != GridStrategy::Kind::Unique) {
      throw UsageError("variable '" + std::string(variable) +
                       "' is categorical; only the unique grid applies");
    }
    for (const auto& level : column.levels()) out.emplace_back(level);
    return out;
  }
  const Eigen::VectorXd grid = numeric_grid(data, variable, strategy);
  for (const double value : grid) out.emplace_back(value);
  return out;
}

// ---------------------------------------------------------------------------
// Column manipulation

Dataset substitute(const Dataset& data, std::string_view variable, const Cell& value) {
  const auto& column = data.column(variable);
  if (kind_of(value) != column.kind()) {
    throw UsageError("cannot substitute a " + std::string(to_string(kind_of(value))) +
                     " value into " + std::string(to_string(column.kind())) +
                     " column '" + column.name() + "'");
  }
  const auto n = data.rows();
  if (const auto* number = std::get_if<double>(&value)) {
    return data.with_column(Column::numeric(
        column.name(), Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), *number)));
  }
  return data.with_column(Column::categorical(
      column.name(), std::vector<std::string>(n, std::get<std::string>(value))));
}

Dataset replace_values(const Dataset& data, std::string_view variable,
                       const Eigen::VectorXd& values) {
  const auto& column = data.column(variable);
  if (!column.is_numeric()) {
    throw UsageError("variable '" + std::string(variable) + "' is categorical");
  }
  return data.with_column(Column::numeric(column.name(), values));
}

Dataset permute_column(const Dataset& data, std::string_view variable, std::uint64_t seed) {
  const auto& column = data.column(variable);
  const auto n = data.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(derive_seed(seed, variable));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  if (column.is_numeric()) {
    Eigen::VectorXd values(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      values[static_cast<Eigen::Index>(i)] =
          column.numeric()[static_cast<Eigen::Index>(order[i])];
    }
    return data.with_column(Column::numeric(column.name(), std::move(values)));
  }
  std::vector<std::string> values;
  values.reserve(n);
  for (const auto index : order) values.push_back(column.categorical()[index]);
  return data.with_column(Column::categorical(column.name(), std::move(values)));
}

// ---------------------------------------------------------------------------
// Random streams

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  if (bound == 0) throw UsageError("empty range");
  // Reject the tail that would bias the modulo.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t draw = next();
  while (draw >= limit) draw = next();
  return draw % bound;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (const unsigned char ch : bytes) {
    hash ^= ch;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view key, std::uint64_t index) {
  SplitMix64 mixer(seed);
  std::uint64_t state = mixer.next() ^ fnv1a64(key);
  SplitMix64 second(state);
  state = second.next() ^ (index * 0xD1B54A32D192ED03ULL);
  return SplitMix64(state).next();
}

}  // namespace boxplain
