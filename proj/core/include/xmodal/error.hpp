#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace xmodal {

enum class ErrorKind {
  DegenerateVector,
  Shape,
  Parameter,
  Precondition,
  Label,
  Gradient,
  Format,
  Parse,
  EmptyReport,
  Split,
  NotFound,
  InsufficientData,
  Build,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Base of every error thrown by the library. Callers that only need to map
// failures onto exit codes or HTTP statuses can switch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define XMODAL_DEFINE_ERROR(Name, Kind)                                  \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& what) : Error(ErrorKind::Kind, what) {} \
  };

XMODAL_DEFINE_ERROR(DegenerateVectorError, DegenerateVector)
XMODAL_DEFINE_ERROR(ShapeError, Shape)
XMODAL_DEFINE_ERROR(ParameterError, Parameter)
XMODAL_DEFINE_ERROR(PreconditionError, Precondition)
XMODAL_DEFINE_ERROR(LabelError, Label)
XMODAL_DEFINE_ERROR(GradientError, Gradient)
XMODAL_DEFINE_ERROR(FormatError, Format)
XMODAL_DEFINE_ERROR(EmptyReportError, EmptyReport)
XMODAL_DEFINE_ERROR(SplitError, Split)
XMODAL_DEFINE_ERROR(NotFoundError, NotFound)
XMODAL_DEFINE_ERROR(InsufficientDataError, InsufficientData)
XMODAL_DEFINE_ERROR(BuildError, Build)
XMODAL_DEFINE_ERROR(IoError, Io)

#undef XMODAL_DEFINE_ERROR

/// Markup error carrying the 1-based position where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column);

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace xmodal
