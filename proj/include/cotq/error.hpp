#pragma once

#include <stdexcept>
#include <string>

namespace cotq {

enum class ErrorKind {
  InvalidSpec,    // malformed grid / weight / config parameters
  InvalidInput,   // bad data handed to an algorithm
  InvalidOrder,   // quantile order outside (0, 1)
  OutOfDomain,    // evaluation point outside the open unit ball
  Infeasible,     // transport marginals do not balance
  SolverStall,    // pivot cap exceeded
  Resource,       // problem too large for the dense solver
  Data,           // ingestion / parse failure
  Io,             // unreadable input or unwritable output
  Unsupported,    // no oracle / feature for this model
  Internal,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidSpec: return "invalid-spec";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::InvalidOrder: return "invalid-order";
    case ErrorKind::OutOfDomain: return "out-of-domain";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::SolverStall: return "solver-stall";
    case ErrorKind::Resource: return "resource";
    case ErrorKind::Data: return "data";
    case ErrorKind::Io: return "io";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Internal: return "internal";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace cotq
