#pragma once

#include <stdexcept>
#include <string>

namespace eafrs {

/// Malformed or inconsistent input data (files, sequences, measurement grids).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A caller violated a documented precondition (bad argument ranges etc.).
class PreconditionError : public std::invalid_argument {
 public:
  explicit PreconditionError(const std::string& what)
      : std::invalid_argument(what) {}
};

/// An external process (encoder, decoder, measured command) failed.
class SubprocessError : public std::runtime_error {
 public:
  SubprocessError(const std::string& what, int exit_code)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

/// Energy meter could not be read or a measurement window was invalid.
class MeterError : public std::runtime_error {
 public:
  explicit MeterError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace eafrs
