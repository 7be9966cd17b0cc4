#include "boxplain/adapters.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <numeric>
#include <regex>

#include <httplib.h>

#include "boxplain/json.hpp"

namespace boxplain {

long default_adapter_timeout_ms() {
  if (const char* text = std::getenv("BOXPLAIN_ADAPTER_TIMEOUT_MS")) {
    long value = 0;
    const auto* end = text + std::strlen(text);
    const auto result = std::from_chars(text, end, value);
    if (result.ec == std::errc() && result.ptr == end && value > 0) return value;
  }
  return 30000;
}

namespace {

std::string excerpt(std::string_view text) {
  return std::string(text.substr(0, kAdapterExcerptBytes));
}

std::string with_stderr(std::string message, std::string_view err) {
  if (!err.empty()) {
    message += "; stderr: ";
    message += excerpt(err);
  }
  return message;
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

std::optional<double> parse_prediction(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, value);
  if (text.empty() || result.ec != std::errc() || result.ptr != end) return std::nullopt;
  return value;
}

// RAII file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

std::pair<Fd, Fd> make_pipe() {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw ModelAdapterError(std::string("pipe: ") + std::strerror(errno));
  }
  return {Fd(fds[0]), Fd(fds[1])};
}

void set_nonblocking(int fd) { ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK); }

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

struct ChildResult {
  int status = 0;
  std::string out;
  std::string err;
};

ChildResult run_child(const SubprocessModelSpec& spec, const std::string& input) {
  ignore_sigpipe();
  std::vector<char*> argv;
  for (const auto& arg : spec.command) argv.push_back(const_cast<char*>(arg.c_str()));
  argv.push_back(nullptr);

  auto [in_read, in_write] = make_pipe();
  auto [out_read, out_write] = make_pipe();
  auto [err_read, err_write] = make_pipe();
  auto [status_read, status_write] = make_pipe();

  const pid_t pid = ::fork();
  if (pid < 0) throw ModelAdapterError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::signal(SIGPIPE, SIG_DFL);
    ::dup2(in_read.get(), STDIN_FILENO);
    ::dup2(out_write.get(), STDOUT_FILENO);
    ::dup2(err_write.get(), STDERR_FILENO);
    ::execvp(argv[0], argv.data());
    const int code = errno;
    [[maybe_unused]] const auto ignored = ::write(status_write.get(), &code, sizeof(code));
    ::_exit(127);
  }
  in_read.reset();
  out_write.reset();
  err_write.reset();
  status_write.reset();

  int exec_errno = 0;
  ssize_t got;
  do {
    got = ::read(status_read.get(), &exec_errno, sizeof(exec_errno));
  } while (got < 0 && errno == EINTR);
  if (got == static_cast<ssize_t>(sizeof(exec_errno))) {
    ::waitpid(pid, nullptr, 0);
    throw ModelAdapterError("cannot start '" + spec.command.front() +
                            "': " + std::strerror(exec_errno));
  }

  set_nonblocking(in_write.get());
  set_nonblocking(out_read.get());
  set_nonblocking(err_read.get());

  ChildResult result;
  std::size_t written = 0;
  if (input.empty()) in_write.reset();
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(spec.timeout_ms);
  char buffer[65536];

  while (out_read || err_read) {
    std::vector<pollfd> fds;
    if (in_write) fds.push_back({in_write.get(), POLLOUT, 0});
    if (out_read) fds.push_back({out_read.get(), POLLIN, 0});
    if (err_read) fds.push_back({err_read.get(), POLLIN, 0});

    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                               deadline - std::chrono::steady_clock::now())
                               .count();
    if (remaining <= 0) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      throw ModelAdapterError(with_stderr(
          "model process timed out after " + std::to_string(spec.timeout_ms) + " ms",
          result.err));
    }
    const int ready = ::poll(fds.data(), fds.size(), static_cast<int>(remaining));
    if (ready < 0) {
      if (errno == EINTR) continue;
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      throw ModelAdapterError(std::string("poll: ") + std::strerror(errno));
    }
    for (const auto& entry : fds) {
      if (entry.revents == 0) continue;
      if (in_write && entry.fd == in_write.get()) {
        const auto n = ::write(entry.fd, input.data() + written, input.size() - written);
        if (n > 0) written += static_cast<std::size_t>(n);
        // A child that stops reading (EPIPE) simply gets no more input.
        if (written == input.size() || (n < 0 && errno != EAGAIN && errno != EINTR)) {
          in_write.reset();
        }
        continue;
      }
      Fd& source = (out_read && entry.fd == out_read.get()) ? out_read : err_read;
      std::string& sink = (&source == &out_read) ? result.out : result.err;
      const auto n = ::read(entry.fd, buffer, sizeof(buffer));
      if (n > 0) {
        sink.append(buffer, static_cast<std::size_t>(n));
      } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
        source.reset();
      }
    }
  }
  in_write.reset();
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.status = status;
  return result;
}

}  // namespace

SubprocessModelSpec SubprocessModelSpec::shell(std::string command_line) {
  SubprocessModelSpec spec;
  spec.command = {"/bin/sh", "-c", std::move(command_line)};
  return spec;
}

Eigen::VectorXd subprocess_predict(const SubprocessModelSpec& spec, const Dataset& query) {
  if (spec.command.empty() || spec.command.front().empty()) {
    throw UsageError("subprocess model: empty command");
  }
  const ChildResult child = run_child(spec, to_csv(query));
  if (WIFSIGNALED(child.status)) {
    throw ModelAdapterError(with_stderr(
        "model process killed by signal " + std::to_string(WTERMSIG(child.status)),
        child.err));
  }
  if (WEXITSTATUS(child.status) != 0) {
    throw ModelAdapterError(with_stderr(
        "model process exited with status " + std::to_string(WEXITSTATUS(child.status)),
        child.err));
  }

  std::vector<std::string_view> lines;
  std::string_view rest = child.out;
  while (!rest.empty()) {
    const auto newline = rest.find('\n');
    lines.push_back(rest.substr(0, newline));
    if (newline == std::string_view::npos) break;
    rest.remove_prefix(newline + 1);
  }
  const auto expected = query.rows();
  if (lines.size() != expected) {
    throw ModelAdapterError(with_stderr("expected " + std::to_string(expected) +
                                            " predictions, got " +
                                            std::to_string(lines.size()),
                                        child.err));
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(expected));
  for (std::size_t i = 0; i < expected; ++i) {
    const auto value = parse_prediction(lines[i]);
    if (!value) {
      throw ModelAdapterError(with_stderr("line " + std::to_string(i + 1) +
                                              ": cannot parse '" + excerpt(lines[i]) +
                                              "' as a number",
                                          child.err));
    }
    out[static_cast<Eigen::Index>(i)] = *value;
  }
  return out;
}

PredictFunction subprocess_model(SubprocessModelSpec spec) {
  if (spec.command.empty()) throw UsageError("subprocess model: empty command");
  return {[spec = std::move(spec)](const Dataset& query) {
            return subprocess_predict(spec, query);
          },
          false};
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex pattern(R"(^http://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:.]+\])(?::([0-9]{1,5}))?(/[^\s#]*)?$)");
  std::smatch match;
  if (!std::regex_match(url, match, pattern)) {
    throw UsageError("invalid or unsupported model URL '" + url +
                     "' (expected http://host[:port][/path])");
  }
  ParsedUrl parsed;
  parsed.host = match[1].str();
  if (match[2].matched) {
    parsed.port = std::stoi(match[2].str());
    if (parsed.port < 1 || parsed.port > 65535) throw UsageError("invalid port in '" + url + "'");
  }
  parsed.path = match[3].matched ? match[3].str() : "/";
  return parsed;
}

}  // namespace

void validate(const HttpModelSpec& spec) {
  parse_url(spec.url);
  if (spec.max_batch < 1) throw UsageError("http model: batch size must be >= 1");
  if (spec.timeout_ms < 1) throw UsageError("http model: timeout must be positive");
}

std::string http_request_body(const Dataset& batch) {
  Json columns = Json::array();
  Json kinds = Json::array();
  for (std::size_t c = 0; c < batch.cols(); ++c) {
    columns.push_back(batch.column(c).name());
    kinds.push_back(std::string(to_string(batch.column(c).kind())));
  }
  Json rows = Json::array();
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    Json row = Json::array();
    for (std::size_t c = 0; c < batch.cols(); ++c) {
      const auto& column = batch.column(c);
      if (column.is_numeric()) {
        row.push_back(column.numeric()[static_cast<Eigen::Index>(r)]);
      } else {
        row.push_back(column.categorical()[r]);
      }
    }
    rows.push_back(std::move(row));
  }
  return compact_json(Json{{"columns", columns}, {"kinds", kinds}, {"rows", rows}});
}

Eigen::VectorXd http_predict(const HttpModelSpec& spec, const Dataset& query) {
  validate(spec);
  const ParsedUrl url = parse_url(spec.url);
  httplib::Client client(url.host, url.port);
  const auto seconds = spec.timeout_ms / 1000;
  const auto micros = (spec.timeout_ms % 1000) * 1000;
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  httplib::Headers headers;
  for (const auto& [key, value] : spec.headers) headers.emplace(key, value);

  Eigen::VectorXd out(static_cast<Eigen::Index>(query.rows()));
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < query.rows(); start += spec.max_batch) {
    const std::size_t count = std::min(spec.max_batch, query.rows() - start);
    rows.resize(count);
    std::iota(rows.begin(), rows.end(), start);
    const Dataset batch = query.take_rows(rows);
    const std::string body = http_request_body(batch);

    const auto response = client.Post(url.path, headers, body, "application/json");
    if (!response) {
      const auto error = response.error();
      const std::string reason = error == httplib::Error::Read || error == httplib::Error::Write ||
                                         error == httplib::Error::ConnectionTimeout
                                     ? "timeout or connection failure"
                                     : "request failed";
      throw ModelAdapterError("POST " + spec.url + ": " + reason + " (" +
                              httplib::to_string(error) + ")");
    }
    if (response->status < 200 || response->status >= 300) {
      throw ModelAdapterError("POST " + spec.url + " returned status " +
                              std::to_string(response->status) + ": " +
                              excerpt(response->body));
    }
    Json parsed;
    try {
      parsed = Json::parse(response->body);
    } catch (const Json::exception&) {
      throw ModelAdapterError("POST " + spec.url + " returned status " +
                              std::to_string(response->status) + " with malformed JSON: " +
                              excerpt(response->body));
    }
    if (!parsed.is_object() || !parsed.contains("predictions") ||
        !parsed["predictions"].is_array()) {
      throw ModelAdapterError("POST " + spec.url + " returned status " +
                              std::to_string(response->status) +
                              " without a predictions array: " + excerpt(response->body));
    }
    const auto& predictions = parsed["predictions"];
    if (predictions.size() != count) {
      throw ModelAdapterError("expected " + std::to_string(count) + " predictions, got " +
                              std::to_string(predictions.size()) + " (status " +
                              std::to_string(response->status) + ")");
    }
    for (std::size_t i = 0; i < count; ++i) {
      if (!predictions[i].is_number()) {
        throw ModelAdapterError("prediction " + std::to_string(start + i + 1) +
                                " is not a number: " + excerpt(predictions[i].dump()));
      }
      out[static_cast<Eigen::Index>(start + i)] = predictions[i].get<double>();
    }
  }
  return out;
}

PredictFunction http_model(HttpModelSpec spec) {
  validate(spec);
  return {[spec = std::move(spec)](const Dataset& query) { return http_predict(spec, query); },
          true};
}

}  // namespace boxplain
