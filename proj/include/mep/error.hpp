#pragma once

#include <stdexcept>
#include <string>

namespace mep {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable name; the CLI maps each kind to its own exit code.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MEP_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

// ingest
MEP_DEFINE_ERROR(FileNotFound);
MEP_DEFINE_ERROR(EmptySeries);
MEP_DEFINE_ERROR(GapError);

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("ParseError", "line " + std::to_string(line) + ": " + reason), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// design
MEP_DEFINE_ERROR(InfeasibleWindow);
MEP_DEFINE_ERROR(OverflowError);

// model
MEP_DEFINE_ERROR(NumericalFailure);
MEP_DEFINE_ERROR(DegenerateMatrix);
MEP_DEFINE_ERROR(DimensionMismatch);

// eval
MEP_DEFINE_ERROR(DegenerateWindow);

// synth
MEP_DEFINE_ERROR(DivergentOrbit);

// shared
MEP_DEFINE_ERROR(PreconditionError);
MEP_DEFINE_ERROR(SchemaMismatch);
MEP_DEFINE_ERROR(IoError);

#undef MEP_DEFINE_ERROR

}  // namespace mep
