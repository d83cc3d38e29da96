#pragma once

#include <stdexcept>
#include <string>

namespace brminer {

enum class ErrorKind {
  Io,
  Parse,
  Config,
  Transport,
  Auth,
  NotFound,
  RateLimited,
  BudgetExceeded,
  NoFence,
  BadJson,
  BadSchema,
  UnknownCategory,
  MissingLabel,
  KeyMismatch,
  MissingProject,
};

const char* to_string(ErrorKind kind);

/// All recoverable failures in the toolkit carry a kind so callers can
/// branch without string matching. `line()` is set only for parse errors
/// that point at a specific input line (1-based).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, long line = -1);

  ErrorKind kind() const { return kind_; }
  long line() const { return line_; }

 private:
  ErrorKind kind_;
  long line_;
};

}  // namespace brminer
