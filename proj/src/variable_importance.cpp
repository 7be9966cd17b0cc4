#include "boxplain/variable_importance.hpp"

#include <algorithm>
#include <map>

namespace boxplain {

namespace {

// Stream key of the all-shuffled row. The NUL keeps it apart from column names.
constexpr std::string_view kAllShuffledKey{"\0all", 4};

}  // namespace

std::uint64_t permutation_seed(std::uint64_t seed, std::string_view variable,
                               std::size_t repeat) {
  return derive_seed(seed, variable, repeat);
}

ImportanceResult variable_importance(const Explainer& explainer, LossKind loss_kind,
                                     std::size_t repeats, std::uint64_t seed,
                                     const std::optional<std::vector<std::string>>& variables) {
  if (repeats < 1) throw UsageError("importance: repeats must be >= 1");
  const Dataset& data = explainer.data();
  std::vector<std::string> names = variables.value_or(data.names());
  for (const auto& name : names) {
    if (!data.has_column(name)) throw UsageError("unknown variable '" + name + "'");
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());

  ImportanceResult result;
  result.label = explainer.label();
  result.loss = loss_kind;
  result.repeats = repeats;
  result.seed = seed;
  result.baseline = loss(loss_kind, explainer.y(), explainer.predict(data));

  // Tasks: (variable, repeat) in canonical order, then the all-shuffled repeats.
  const std::size_t single = names.size() * repeats;
  const std::size_t total = single + repeats;
  const auto all_names = data.names();
  const auto make_query = [&](std::size_t task) {
    if (task < single) {
      const auto& name = names[task / repeats];
      return permute_column(data, name, permutation_seed(seed, name, task % repeats));
    }
    const std::uint64_t repeat_seed = permutation_seed(seed, kAllShuffledKey, task - single);
    Dataset shuffled = data;
    for (const auto& name : all_names) shuffled = permute_column(shuffled, name, repeat_seed);
    return shuffled;
  };
  const auto describe = [&](std::size_t task) {
    if (task < single) {
      return "variable '" + names[task / repeats] + "' repeat " + std::to_string(task % repeats);
    }
    return "all variables shuffled, repeat " + std::to_string(task - single);
  };
  const auto predictions = explainer.predict_each(total, make_query, describe);

  for (std::size_t v = 0; v < names.size(); ++v) {
    ImportanceRow row;
    row.variable = names[v];
    double sum = 0.0;
    for (std::size_t b = 0; b < repeats; ++b) {
      const double value = loss(loss_kind, explainer.y(), predictions[v * repeats + b]);
      row.permuted.push_back(value);
      sum += value;
    }
    row.permuted_mean = sum / static_cast<double>(repeats);
    // A loss equal in every repeat reports exactly that loss.
    if (std::all_of(row.permuted.begin(), row.permuted.end(),
                    [&](double v) { return v == row.permuted.front(); })) {
      row.permuted_mean = row.permuted.front();
    }
    row.drop = row.permuted_mean - result.baseline;
    result.rows.push_back(std::move(row));
  }
  double all_sum = 0.0;
  for (std::size_t b = 0; b < repeats; ++b) {
    all_sum += loss(loss_kind, explainer.y(), predictions[single + b]);
  }
  result.all_shuffled = all_sum / static_cast<double>(repeats);
  return result;
}

std::vector<ImportanceOverlayRow> compare_importance(
    const std::vector<ImportanceResult>& results) {
  std::vector<std::string> labels;
  for (const auto& result : results) labels.push_back(result.label);
  require_distinct_labels(labels);
  for (const auto& result : results) {
    if (result.loss != results.front().loss) {
      throw UsageError("cannot compare importance computed with different losses (" +
                       std::string(to_string(results.front().loss)) + " vs " +
                       std::string(to_string(result.loss)) + ")");
    }
  }
  std::vector<const ImportanceRow*> first;
  for (const auto& row : results.front().rows) first.push_back(&row);
  std::stable_sort(first.begin(), first.end(), [](const auto* a, const auto* b) {
    if (a->drop != b->drop) return a->drop > b->drop;
    return a->variable < b->variable;
  });
  std::vector<std::string> order;
  for (const auto* row : first) order.push_back(row->variable);
  // Variables absent from the first result follow, by name.
  std::vector<std::string> extra;
  for (const auto& result : results) {
    for (const auto& row : result.rows) {
      if (std::find(order.begin(), order.end(), row.variable) == order.end() &&
          std::find(extra.begin(), extra.end(), row.variable) == extra.end()) {
        extra.push_back(row.variable);
      }
    }
  }
  std::sort(extra.begin(), extra.end());
  order.insert(order.end(), extra.begin(), extra.end());

  std::vector<ImportanceOverlayRow> out;
  for (const auto& variable : order) {
    for (const auto& result : results) {
      for (const auto& row : result.rows) {
        if (row.variable == variable) {
          out.push_back({result.label, variable, result.baseline, row.permuted_mean});
        }
      }
    }
  }
  return out;
}

}  // namespace boxplain
