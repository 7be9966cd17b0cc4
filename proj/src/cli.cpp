#include "boxplain/cli.hpp"

#include <unistd.h>

#include <CLI11.hpp>

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <thread>

#include "boxplain/adapters.hpp"
#include "boxplain/error.hpp"
#include "boxplain/viz.hpp"

namespace boxplain::cli {

namespace {

int parse_positive(std::string_view key, std::string_view text) {
  int value = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size() || value < 1) {
    throw UsageError("model spec: " + std::string(key) + " must be a positive integer, got '" +
                     std::string(text) + "'");
  }
  return value;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "': " + std::strerror(errno));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw IoError("cannot read '" + path + "'");
  return buffer.str();
}

SchemaHints hints_of(const Dataset& data) {
  SchemaHints hints;
  for (std::size_t c = 0; c < data.cols(); ++c) {
    hints.emplace(data.column(c).name(), data.column(c).kind());
  }
  return hints;
}

}  // namespace

ModelSpec ModelSpec::parse(std::string_view text) {
  ModelSpec spec;
  spec.text = std::string(text);
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw UsageError("model spec '" + spec.text +
                     "' must start with builtin:, cmd:, http: or file:");
  }
  const std::string_view scheme = text.substr(0, colon);
  const std::string_view rest = text.substr(colon + 1);
  if (scheme == "builtin") {
    if (rest == "ols") {
      spec.scheme = Scheme::Ols;
      return spec;
    }
    if (rest == "tree" || rest.starts_with("tree:")) {
      spec.scheme = Scheme::Tree;
      std::string_view params = rest.size() > 4 ? rest.substr(5) : std::string_view{};
      while (!params.empty()) {
        const auto comma = params.find(',');
        const std::string_view item = params.substr(0, comma);
        params = comma == std::string_view::npos ? std::string_view{} : params.substr(comma + 1);
        const auto eq = item.find('=');
        const std::string_view key = item.substr(0, eq);
        const std::string_view value =
            eq == std::string_view::npos ? std::string_view{} : item.substr(eq + 1);
        if (key == "maxdepth") {
          spec.max_depth = parse_positive(key, value);
        } else if (key == "minleaf") {
          spec.min_leaf = parse_positive(key, value);
        } else {
          throw UsageError("model spec: unknown tree parameter '" + std::string(item) + "'");
        }
      }
      return spec;
    }
    throw UsageError("unknown builtin model '" + std::string(rest) + "' (expected ols or tree)");
  }
  if (rest.empty()) throw UsageError("model spec '" + spec.text + "' is missing its argument");
  spec.argument = std::string(rest);
  if (scheme == "cmd") {
    spec.scheme = Scheme::Command;
  } else if (scheme == "http") {
    // The URL keeps its own scheme: "http:http://host/path" or "http://host/path".
    spec.scheme = Scheme::Http;
    if (!spec.argument.starts_with("http://")) spec.argument = spec.text;
  } else if (scheme == "file") {
    spec.scheme = Scheme::File;
  } else {
    throw UsageError("unknown model scheme '" + std::string(scheme) + "'");
  }
  return spec;
}

PredictFunction build_model(const ModelSpec& spec, const Dataset& train,
                            const std::vector<std::pair<std::string, std::string>>& headers) {
  switch (spec.scheme) {
    case ModelSpec::Scheme::Ols: {
      const Dataset features = train.features();
      return SavedModel{fit_linear(features, train.target_values()), feature_schema(features)}
          .predict_function();
    }
    case ModelSpec::Scheme::Tree: {
      const Dataset features = train.features();
      return SavedModel{fit_tree(features, train.target_values(), spec.max_depth, spec.min_leaf),
                        feature_schema(features)}
          .predict_function();
    }
    case ModelSpec::Scheme::Command:
      return subprocess_model(SubprocessModelSpec::shell(spec.argument));
    case ModelSpec::Scheme::Http: {
      HttpModelSpec http;
      http.url = spec.argument;
      http.headers = headers;
      validate(http);
      return http_model(std::move(http));
    }
    case ModelSpec::Scheme::File: {
      const SavedModel saved = load_model(read_file(spec.argument));
      if (saved.features != feature_schema(train.features())) {
        throw UsageError("model file '" + spec.argument +
                         "' was fitted on different feature columns");
      }
      return saved.predict_function();
    }
  }
  throw UsageError("unsupported model spec");
}

Observation parse_observation(const Dataset& data, const std::optional<std::string>& file,
                              const std::optional<std::size_t>& row_index) {
  if (file.has_value() == row_index.has_value()) {
    throw UsageError("give exactly one of --observation and --row-index");
  }
  if (row_index) return Observation::from_row(data, *row_index);

  std::ifstream in(*file, std::ios::binary);
  if (!in) throw IoError("cannot open '" + *file + "': " + std::strerror(errno));
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  // Hints only for the columns the file actually has; missing ones are
  // reported by the schema check below.
  std::istringstream first_pass(text);
  const Dataset untyped = load_csv_table(first_pass);
  SchemaHints hints;
  for (const auto& [name, kind] : hints_of(data)) {
    if (untyped.has_column(name)) hints.emplace(name, kind);
  }
  std::istringstream second_pass(text);
  const Dataset row = load_csv_table(second_pass, hints);
  if (row.rows() != 1) {
    throw UsageError("observation file '" + *file + "' must hold exactly one row, got " +
                     std::to_string(row.rows()));
  }
  std::vector<std::pair<std::string, Cell>> values;
  for (std::size_t c = 0; c < row.cols(); ++c) {
    const auto& name = row.column(c).name();
    if (data.target() && name == *data.target()) continue;
    values.emplace_back(name, row.column(c).cell(0));
  }
  Observation observation(std::move(values));
  observation.check_schema(data.features());
  // Schema order, so results do not depend on the file's column order.
  std::vector<std::pair<std::string, Cell>> ordered;
  for (const auto& name : data.features().names()) ordered.emplace_back(name, observation.at(name));
  return Observation(std::move(ordered));
}

void write_files_atomically(const std::vector<std::pair<std::string, std::string>>& files) {
  std::vector<std::string> temporaries;
  const auto cleanup = [&] {
    for (const auto& tmp : temporaries) std::remove(tmp.c_str());
  };
  for (const auto& [path, contents] : files) {
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    temporaries.push_back(tmp);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      const std::string reason = std::strerror(errno);
      cleanup();
      throw IoError("cannot write '" + path + "': " + reason);
    }
    out << contents;
    out.close();
    if (!out) {
      cleanup();
      throw IoError("cannot write '" + path + "'");
    }
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (std::rename(temporaries[i].c_str(), files[i].first.c_str()) != 0) {
      const std::string reason = std::strerror(errno);
      for (std::size_t j = i; j < temporaries.size(); ++j) std::remove(temporaries[j].c_str());
      throw IoError("cannot write '" + files[i].first + "': " + reason);
    }
  }
}

namespace {

struct RunConfig {
  std::string data;
  std::string target;
  std::optional<std::string> train;
  std::vector<std::string> models;
  std::vector<std::string> labels;
  std::vector<std::string> headers;
  std::optional<std::string> json;
  std::optional<std::string> svg;
  std::uint64_t seed = 0;
  std::size_t jobs = 0;
  std::string title;
  int width = 800;
  int height = 0;
  bool log_y = false;

  std::string variable;
  std::string grid = "quantile:" + std::to_string(kDefaultPdpGrid);
  std::size_t bins = kDefaultAleBins;
  std::optional<std::size_t> groups;
  std::size_t repeats = kDefaultRepeats;
  std::string loss = "rmse";
  std::vector<std::string> variables;
  std::optional<std::string> observation;
  std::optional<std::size_t> row_index;
  std::string direction = "up";
  bool normalize = false;
  std::string out;
};

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--data", cfg.data, "Validation data CSV")->required();
  sub->add_option("--target", cfg.target, "Target column")->required();
  sub->add_option("--train", cfg.train, "Training CSV for built-in models (default: --data)");
  sub->add_option("--model", cfg.models,
                  "builtin:ols | builtin:tree[:maxdepth=D,minleaf=M] | cmd:<command> | "
                  "http:<url> | file:<model.json>")
      ->required()
      ->take_all();
  sub->add_option("--label", cfg.labels, "Label of the matching --model")->take_all();
  sub->add_option("--header", cfg.headers, "HTTP header 'Name: value' for http: models");
  sub->add_option("--jobs", cfg.jobs, "Concurrent predict calls (default: CPU count)");
}

void add_outputs(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--json", cfg.json, "Write results as canonical JSON");
  sub->add_option("--svg", cfg.svg, "Write an SVG chart");
  sub->add_option("--title", cfg.title, "Chart title");
  sub->add_option("--width", cfg.width, "Chart width in pixels");
  sub->add_option("--height", cfg.height, "Chart height in pixels (default: automatic)");
}

void add_observation(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--observation", cfg.observation, "One-row CSV with the observation");
  sub->add_option("--row-index", cfg.row_index, "Use validation row i (0-based)");
}

std::vector<std::pair<std::string, std::string>> parse_headers(
    const std::vector<std::string>& raw) {
  std::vector<std::pair<std::string, std::string>> headers;
  for (const auto& header : raw) {
    const auto colon = header.find(':');
    if (colon == std::string::npos || colon == 0) {
      throw UsageError("--header must look like 'Name: value', got '" + header + "'");
    }
    std::string value = header.substr(colon + 1);
    value.erase(0, value.find_first_not_of(' '));
    headers.emplace_back(header.substr(0, colon), value);
  }
  return headers;
}

std::vector<Explainer> build_explainers(const RunConfig& cfg, const Dataset& data) {
  if (cfg.labels.size() > cfg.models.size()) {
    throw UsageError("more --label values (" + std::to_string(cfg.labels.size()) +
                     ") than --model values (" + std::to_string(cfg.models.size()) + ")");
  }
  std::vector<ModelSpec> specs;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < cfg.models.size(); ++i) {
    specs.push_back(ModelSpec::parse(cfg.models[i]));
    labels.push_back(i < cfg.labels.size() ? cfg.labels[i] : cfg.models[i]);
  }
  require_distinct_labels(labels);
  const auto headers = parse_headers(cfg.headers);

  const Dataset train = cfg.train ? load_csv_file(*cfg.train, cfg.target, hints_of(data)) : data;
  if (!train.same_schema(data)) {
    throw DataError("training data '" + *cfg.train + "' has different columns than '" +
                    cfg.data + "'");
  }
  std::size_t jobs = cfg.jobs;
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());

  std::vector<Explainer> explainers;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    explainers.push_back(
        explain(build_model(specs[i], train, headers), data, data.target_values(), labels[i])
            .with_jobs(jobs));
  }
  return explainers;
}

void emit(const RunConfig& cfg, const std::vector<ExplainerResult>& results, std::ostream& out) {
  const std::string json = export_json(results);
  std::vector<std::pair<std::string, std::string>> files;
  if (cfg.json) files.emplace_back(*cfg.json, json);
  if (cfg.svg) {
    RenderOptions options;
    options.width = cfg.width;
    options.height = cfg.height;
    options.title = cfg.title;
    options.log_y = cfg.log_y;
    files.emplace_back(*cfg.svg, render(results, options).svg);
  }
  if (files.empty()) {
    out << json;
    return;
  }
  write_files_atomically(files);
}

void run_fit(const RunConfig& cfg) {
  const Dataset data = load_csv_file(cfg.data, cfg.target);
  if (cfg.models.size() != 1) throw UsageError("fit takes exactly one --model");
  const ModelSpec spec = ModelSpec::parse(cfg.models.front());
  const Dataset features = data.features();
  SavedModel saved{LinearModel{}, feature_schema(features)};
  if (spec.scheme == ModelSpec::Scheme::Ols) {
    saved.model = fit_linear(features, data.target_values());
  } else if (spec.scheme == ModelSpec::Scheme::Tree) {
    saved.model = fit_tree(features, data.target_values(), spec.max_depth, spec.min_leaf);
  } else {
    throw UsageError("fit only supports builtin: models");
  }
  write_files_atomically({{cfg.out, save_model(saved)}});
}

void run_explainer(const std::string& command, RunConfig& cfg, std::ostream& out) {
  const Dataset data = load_csv_file(cfg.data, cfg.target);
  std::optional<Observation> observation;
  if (command == "cp" || command == "breakdown") {
    observation = parse_observation(data, cfg.observation, cfg.row_index);
  }
  const auto explainers = build_explainers(cfg, data);
  std::optional<std::vector<std::string>> variables;
  if (!cfg.variables.empty()) variables = cfg.variables;

  std::vector<ExplainerResult> results;
  for (const auto& explainer : explainers) {
    if (command == "perf") {
      results.emplace_back(model_performance(explainer));
    } else if (command == "pdp") {
      results.emplace_back(
          partial_dependence(explainer, cfg.variable, GridStrategy::parse(cfg.grid)));
    } else if (command == "ale") {
      results.emplace_back(accumulated_local_effects(explainer, cfg.variable, cfg.bins));
    } else if (command == "merge") {
      results.emplace_back(factor_merge(explainer, cfg.variable, cfg.groups));
    } else if (command == "importance") {
      results.emplace_back(
          variable_importance(explainer, parse_loss(cfg.loss), cfg.repeats, cfg.seed, variables));
    } else if (command == "cp") {
      CPProfile profile =
          ceteris_paribus(explainer, *observation, variables, GridStrategy::parse(cfg.grid));
      if (cfg.normalize) profile = normalize_cp(std::move(profile), explainer);
      results.emplace_back(std::move(profile));
    } else {
      results.emplace_back(
          break_down(explainer, *observation, parse_direction(cfg.direction)));
    }
  }
  emit(cfg, results, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Model-agnostic explanations for tabular regression models", "boxplain"};
  app.require_subcommand(1, 1);

  auto* perf = app.add_subcommand("perf", "Residual distributions (reverse ECDF, boxplots)");
  auto* pdp = app.add_subcommand("pdp", "Partial dependence of one numeric variable");
  auto* ale = app.add_subcommand("ale", "Accumulated local effects of one numeric variable");
  auto* merge = app.add_subcommand("merge", "Merging path of one categorical variable");
  auto* importance = app.add_subcommand("importance", "Permutation variable importance");
  auto* cp = app.add_subcommand("cp", "Ceteris paribus profiles of one observation");
  auto* breakdown = app.add_subcommand("breakdown", "Break-down attribution of one observation");
  auto* fit = app.add_subcommand("fit", "Fit a built-in model and save it as JSON");

  for (auto* sub : {perf, pdp, ale, merge, importance, cp, breakdown}) {
    add_common(sub, cfg);
    add_outputs(sub, cfg);
  }
  perf->add_flag("--log-y", cfg.log_y, "Logarithmic survival axis");
  for (auto* sub : {pdp, ale, merge}) {
    sub->add_option("--variable", cfg.variable, "Variable to explain")->required();
  }
  pdp->add_option("--grid", cfg.grid, "quantile:K | uniform:K | unique");
  ale->add_option("--bins", cfg.bins, "Number of quantile bins");
  merge->add_option("--groups", cfg.groups, "Number of groups to report (default: min(3, L))");
  importance->add_option("--repeats", cfg.repeats, "Permutations per variable");
  importance->add_option("--loss", cfg.loss, "rmse | mse | mae");
  importance->add_option("--seed", cfg.seed, "Permutation seed");
  importance->add_option("--variables", cfg.variables, "Comma-separated subset")->delimiter(',');
  add_observation(cp, cfg);
  cp->add_option("--variables", cfg.variables, "Comma-separated subset")->delimiter(',');
  cp->add_option("--grid", cfg.grid, "quantile:K | uniform:K | unique");
  cp->add_flag("--normalize", cfg.normalize, "Add ECDF-normalized grid positions");
  add_observation(breakdown, cfg);
  breakdown->add_option("--direction", cfg.direction, "up | down");
  for (auto* sub : {perf, pdp, ale, merge, cp, breakdown}) {
    sub->add_option("--seed", cfg.seed, "Accepted for uniformity; unused");
  }

  fit->add_option("--data", cfg.data, "Training data CSV")->required();
  fit->add_option("--target", cfg.target, "Target column")->required();
  fit->add_option("--model", cfg.models, "builtin:ols | builtin:tree[:...]")->required();
  fit->add_option("--out", cfg.out, "Model JSON output path")->required();

  if (!args.empty() && !args.front().starts_with("-") &&
      app.get_subcommand_no_throw(args.front()) == nullptr) {
    err << "ERROR[1]: unknown subcommand '" << args.front() << "'\n" << app.help();
    return 1;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "ERROR[1]: " << e.what() << '\n';
    const auto* chosen = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << chosen->help();
    return 1;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "fit") {
      run_fit(cfg);
    } else {
      run_explainer(command, cfg, out);
    }
  } catch (const Error& e) {
    err << "ERROR[" << e.exit_code() << "]: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "ERROR[4]: " << e.what() << '\n';
    return 4;
  }
  return 0;
}

}  // namespace boxplain::cli
