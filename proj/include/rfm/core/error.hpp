#pragma once

#include <stdexcept>
#include <string>

namespace rfm {

/// Error categories; the CLI maps each category to a distinct exit code.
enum class ErrorCode {
  Usage = 1,       /* bad arguments / unknown keys */
  Parse = 2,       /* malformed config, mesh or data files */
  Solver = 3,      /* eigensolver or ODE solver failure */
  Io = 4,          /* filesystem failures */
  Numeric = 5,     /* NaN/Inf aborts, degenerate geometry */
  Checkpoint = 6,  /* checkpoint/config mismatch */
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

struct ParseError : Error {
  explicit ParseError(const std::string& w) : Error(ErrorCode::Parse, w) {}
};
struct SolverError : Error {
  explicit SolverError(const std::string& w) : Error(ErrorCode::Solver, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorCode::Io, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorCode::Numeric, w) {}
};
struct CheckpointError : Error {
  explicit CheckpointError(const std::string& w) : Error(ErrorCode::Checkpoint, w) {}
};
/// Violated pre/post condition of a library operation.
struct ContractViolation : Error {
  explicit ContractViolation(const std::string& w) : Error(ErrorCode::Numeric, w) {}
};

#define RFM_REQUIRE(cond, ExcType, msg) \
  do {                                  \
    if (!(cond)) throw ExcType(msg);    \
  } while (0)

}  // namespace rfm
