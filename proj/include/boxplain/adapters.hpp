#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "boxplain/data.hpp"
#include "boxplain/model.hpp"

namespace boxplain {

/// 30000 ms unless BOXPLAIN_ADAPTER_TIMEOUT_MS holds a positive integer.
long default_adapter_timeout_ms();

/// Longest stderr/body excerpt carried in adapter errors.
inline constexpr std::size_t kAdapterExcerptBytes = 4096;

// Child process protocol: the query goes to stdin as CSV with a header and
// stdin is closed; stdout must hold exactly one decimal number per query row.
// One process per call.
struct SubprocessModelSpec {
  std::vector<std::string> command;  // program followed by its arguments
  long timeout_ms = default_adapter_timeout_ms();

  /// ["/bin/sh", "-c", command_line]
  static SubprocessModelSpec shell(std::string command_line);
};

Eigen::VectorXd subprocess_predict(const SubprocessModelSpec& spec, const Dataset& query);
/// Not reentrant.
PredictFunction subprocess_model(SubprocessModelSpec spec);

// HTTP protocol: one POST per batch of at most max_batch rows with body
// {"columns":[...],"kinds":[...],"rows":[[...],...]}; the response body must
// be {"predictions":[...]} with one number per row.
struct HttpModelSpec {
  std::string url;  // http://host[:port][/path]
  long timeout_ms = default_adapter_timeout_ms();
  std::size_t max_batch = 1024;
  std::vector<std::pair<std::string, std::string>> headers;
};

/// Throws UsageError for URLs this client cannot reach.
void validate(const HttpModelSpec& spec);

/// The request body for one batch, exactly as sent.
std::string http_request_body(const Dataset& batch);

Eigen::VectorXd http_predict(const HttpModelSpec& spec, const Dataset& query);
/// Reentrant.
PredictFunction http_model(HttpModelSpec spec);

}  // namespace boxplain
