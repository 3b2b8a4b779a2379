#pragma once

#include <stdexcept>
#include <string>

namespace spsro {

/// Base class of every error raised by the library. `category()` is a short
/// machine-parsable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& what)
      : std::runtime_error(what), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define SPSRO_DEFINE_ERROR(Name, tag)                                  \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(tag, what) {}       \
  }

SPSRO_DEFINE_ERROR(InvalidArgument, "invalid-argument");
SPSRO_DEFINE_ERROR(InvalidPolicy, "invalid-policy");
SPSRO_DEFINE_ERROR(PreconditionViolation, "precondition-violation");
SPSRO_DEFINE_ERROR(ResourceLimit, "resource-limit");
SPSRO_DEFINE_ERROR(CapacityError, "capacity");
SPSRO_DEFINE_ERROR(LoadError, "load-error");
SPSRO_DEFINE_ERROR(IoError, "io-error");
SPSRO_DEFINE_ERROR(SelectorFailure, "selector-failure");
SPSRO_DEFINE_ERROR(NotImplemented, "not-implemented");

#undef SPSRO_DEFINE_ERROR

/// Parse failure in a dataset, CSV or config file. Carries the 1-based line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("parse-error", "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace spsro
