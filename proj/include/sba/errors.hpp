#pragma once

#include <stdexcept>
#include <string>

namespace sba {

// Base class for every failure this library reports.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unreadable/malformed inputs: files, formats, configuration. CLI exit code 2.
struct InputError : Error {
  using Error::Error;
};

// Optimization failures: non-finite cost, rank-deficient systems. CLI exit code 3.
struct SolverError : Error {
  using Error::Error;
};

// Evaluation failures: insufficient trajectory overlap, empty metric sets,
// degenerate alignment. CLI exit code 4.
struct EvalError : Error {
  using Error::Error;
};

}  // namespace sba
