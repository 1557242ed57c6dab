#include "xmodal/error.hpp"

namespace xmodal {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateVector: return "degenerate-vector";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Label: return "label";
    case ErrorKind::Gradient: return "gradient";
    case ErrorKind::Format: return "format";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::EmptyReport: return "empty-report";
    case ErrorKind::Split: return "split";
    case ErrorKind::NotFound: return "not-found";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Build: return "build";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(what), kind_(kind) {}

ParseError::ParseError(const std::string& message, std::size_t line,
                       std::size_t column)
    : Error(ErrorKind::Parse, message + " at line " + std::to_string(line) +
                                  ", column " + std::to_string(column)),
      line_(line),
      column_(column) {}

}  // namespace xmodal
