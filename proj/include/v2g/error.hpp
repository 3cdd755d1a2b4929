#pragma once

#include <stdexcept>
#include <string>

namespace v2g {

// Error categories. Each maps to a distinct CLI exit code.
enum class ErrorKind {
  domain = 1,      // argument outside the documented domain of a formula
  model = 2,       // inconsistent model parameters (e.g. OCV slope vs R0)
  config = 3,      // configuration parse / validation failure
  missing_file = 4,
  infeasible = 5,  // fleet or schedule cannot satisfy its constraints
  divergence = 6,  // training produced non-finite values
  io = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(ErrorKind::domain, w) {}
};
struct ModelError : Error {
  explicit ModelError(const std::string& w) : Error(ErrorKind::model, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::config, w) {}
};
struct MissingFileError : Error {
  explicit MissingFileError(const std::string& w)
      : Error(ErrorKind::missing_file, w) {}
};
struct InfeasibleError : Error {
  explicit InfeasibleError(const std::string& w)
      : Error(ErrorKind::infeasible, w) {}
};
struct DivergenceError : Error {
  explicit DivergenceError(const std::string& w)
      : Error(ErrorKind::divergence, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};

// Process exit code for an error category; 0 is reserved for success and
// 1 for uncategorized failures.
constexpr int exit_code(ErrorKind kind) noexcept {
  return 10 + static_cast<int>(kind);
}

}  // namespace v2g
