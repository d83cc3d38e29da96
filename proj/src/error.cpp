#include "brminer/error.hpp"

namespace brminer {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Config: return "config";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Auth: return "auth";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::RateLimited: return "rate-limited";
    case ErrorKind::BudgetExceeded: return "budget-exceeded";
    case ErrorKind::NoFence: return "no-fence";
    case ErrorKind::BadJson: return "bad-json";
    case ErrorKind::BadSchema: return "bad-schema";
    case ErrorKind::UnknownCategory: return "unknown-category";
    case ErrorKind::MissingLabel: return "missing-label";
    case ErrorKind::KeyMismatch: return "key-mismatch";
    case ErrorKind::MissingProject: return "missing-project";
  }
  return "unknown";
}

namespace {

std::string format_message(ErrorKind kind, const std::string& message, long line) {
  std::string out = "[";
  out += to_string(kind);
  out += "] ";
  out += message;
  if (line >= 0) {
    out += " (line ";
    out += std::to_string(line);
    out += ")";
  }
  return out;
}

}  // namespace

Error::Error(ErrorKind kind, const std::string& message, long line)
    : std::runtime_error(format_message(kind, message, line)), kind_(kind), line_(line) {}

}  // namespace brminer
