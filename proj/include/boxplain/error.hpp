#pragma once

#include <stdexcept>
#include <string>

namespace boxplain {

/// Error categories. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  Usage = 1,
  Data = 2,
  ModelAdapter = 3,
  Io = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// A design matrix that cannot be fitted is a property of the data.
class FitError : public DataError {
 public:
  explicit FitError(const std::string& what) : DataError(what) {}
};

class ModelAdapterError : public Error {
 public:
  explicit ModelAdapterError(const std::string& what)
      : Error(ErrorKind::ModelAdapter, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace boxplain
