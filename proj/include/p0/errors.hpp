#pragma once

#include <stdexcept>
#include <string>

namespace p0 {

// Base of every error raised by the library. `kind()` is a stable,
// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define P0_DEFINE_ERROR(Name)                                       \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  };

P0_DEFINE_ERROR(ShapeMismatch)
P0_DEFINE_ERROR(SelfLoopRequested)
P0_DEFINE_ERROR(InvalidArgument)
P0_DEFINE_ERROR(SingularInformation)
P0_DEFINE_ERROR(GammaUnidentified)
P0_DEFINE_ERROR(DegenerateNetwork)
P0_DEFINE_ERROR(DegenerateVariance)
P0_DEFINE_ERROR(RestrictionMismatch)

// Dataset / IO errors.
P0_DEFINE_ERROR(ReferentialIntegrityError)
P0_DEFINE_ERROR(SelfLoopError)
P0_DEFINE_ERROR(DuplicateEdgeError)
P0_DEFINE_ERROR(EmptyAfterPruning)
P0_DEFINE_ERROR(RuleKindMismatch)

#undef P0_DEFINE_ERROR

/// The likelihood has no finite maximizer. `diverged()` distinguishes
/// iterates escaping to infinity from an exhausted iteration budget.
class NonExistence : public Error {
 public:
  NonExistence(bool diverged, const std::string& what)
      : Error("NonExistence", what), diverged_(diverged) {}
  bool diverged() const noexcept { return diverged_; }

 private:
  bool diverged_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, std::size_t column,
             const std::string& what)
      : Error("ParseError", source + ":" + std::to_string(line) + ":" +
                                std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace p0
