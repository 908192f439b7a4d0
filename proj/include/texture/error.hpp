#ifndef TEXTURE_ERROR_HPP
#define TEXTURE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace texture {

enum class ErrorCode {
  invalid_input,
  mass_overflow,
  divergence_infinite,
  degenerate_reference,
  missing_embedding,
  convergence_failure,
  schema_error,
  validation_error,
  io_error,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return "InvalidInput";
    case ErrorCode::mass_overflow: return "MassOverflow";
    case ErrorCode::divergence_infinite: return "DivergenceInfinite";
    case ErrorCode::degenerate_reference: return "DegenerateReference";
    case ErrorCode::missing_embedding: return "MissingEmbedding";
    case ErrorCode::convergence_failure: return "ConvergenceFailure";
    case ErrorCode::schema_error: return "SchemaError";
    case ErrorCode::validation_error: return "ValidationError";
    case ErrorCode::io_error: return "IOError";
  }
  return "Unknown";
}

/// Base of every exception thrown by the library. `code()` tells callers
/// (the CLI in particular) which failure class occurred.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define TEXTURE_DEFINE_ERROR(Name, Code)                          \
  class Name : public Error {                                     \
   public:                                                        \
    explicit Name(const std::string& what) : Error(Code, what) {} \
  };

TEXTURE_DEFINE_ERROR(InvalidInput, ErrorCode::invalid_input)
TEXTURE_DEFINE_ERROR(MassOverflow, ErrorCode::mass_overflow)
TEXTURE_DEFINE_ERROR(DivergenceInfinite, ErrorCode::divergence_infinite)
TEXTURE_DEFINE_ERROR(DegenerateReference, ErrorCode::degenerate_reference)
TEXTURE_DEFINE_ERROR(MissingEmbedding, ErrorCode::missing_embedding)
TEXTURE_DEFINE_ERROR(SchemaError, ErrorCode::schema_error)
TEXTURE_DEFINE_ERROR(ValidationError, ErrorCode::validation_error)
TEXTURE_DEFINE_ERROR(IoError, ErrorCode::io_error)

#undef TEXTURE_DEFINE_ERROR

class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double residual)
      : Error(ErrorCode::convergence_failure, what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

}  // namespace texture

#endif  // TEXTURE_ERROR_HPP
