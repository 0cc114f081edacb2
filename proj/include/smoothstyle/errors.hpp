#pragma once

#include <stdexcept>
#include <string>

namespace smoothstyle {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A caller violated a documented precondition (dimension mismatch, empty
// batch, out-of-range domain index, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Dataset-level problems: missing archives, empty domains, unreadable files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Bad or incomplete experiment configuration (unknown keys, missing backend
// weights, unsupported image size).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

// A single interpolation path whose step distances are all zero.
class DegeneratePathError : public Error {
 public:
  using Error::Error;
};

// Every sampled path was degenerate; scoring such an evaluation as smooth
// would reopen the collapsed-generator loophole, so it is an error instead.
class DegenerateGeneratorError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace smoothstyle
