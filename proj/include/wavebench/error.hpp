#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace wavebench {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A domain value violates one of its invariants. `field()` names the offender
/// using the same dotted path as the config files (e.g. "scenario.dt").
class ValidationError : public Error {
public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)), reason_(what) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& reason() const noexcept { return reason_; }

private:
  std::string field_;
  std::string reason_;
};

class DegenerateGapError : public Error {
public:
  using Error::Error;
};

class NoEquilibriumError : public Error {
public:
  using Error::Error;
};

class SingularTransferError : public Error {
public:
  using Error::Error;
};

class InsufficientStructureError : public Error {
public:
  using Error::Error;
};

class UnknownClassError : public Error {
public:
  using Error::Error;
};

class NonUniformTimestampsError : public Error {
public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed CSV input; `line()` is 1-based and counts the header.
class CsvParseError : public Error {
public:
  CsvParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

namespace detail {
inline void require(bool ok, const char* field, const char* what) {
  if (!ok) throw ValidationError(field, what);
}
}  // namespace detail

}  // namespace wavebench
