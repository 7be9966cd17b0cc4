#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "boxplain/data.hpp"
#include "boxplain/model.hpp"

namespace boxplain::cli {

inline constexpr int kDefaultTreeDepth = 6;
inline constexpr int kDefaultTreeMinLeaf = 5;
inline constexpr std::size_t kDefaultRepeats = 10;

struct ModelSpec {
  enum class Scheme { Ols, Tree, Command, Http, File };

  Scheme scheme = Scheme::Ols;
  std::string text;      // the spec exactly as given; the default label
  std::string argument;  // command line, URL or file path
  int max_depth = kDefaultTreeDepth;
  int min_leaf = kDefaultTreeMinLeaf;

  /// "builtin:ols" | "builtin:tree[:maxdepth=D,minleaf=M]" | "cmd:<shell command>"
  /// | "http:<url>" | "file:<saved model JSON>"
  static ModelSpec parse(std::string_view text);
};

/// Fits or connects the model. Built-in models are fitted on `train`.
PredictFunction build_model(const ModelSpec& spec, const Dataset& train,
                            const std::vector<std::pair<std::string, std::string>>& headers = {});

/// Either a one-row CSV file (target column allowed) or row `row_index` of
/// `data`. Exactly one source must be given.
Observation parse_observation(const Dataset& data, const std::optional<std::string>& file,
                              const std::optional<std::size_t>& row_index);

/// Writes every (path, contents) pair through a temporary file and renames
/// them into place only after all temporaries were written.
void write_files_atomically(const std::vector<std::pair<std::string, std::string>>& files);

/// Runs one command line (program name excluded). Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace boxplain::cli
