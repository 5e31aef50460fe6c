// include/diarkit/error.hpp
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace diarkit {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DIARKIT_DEFINE_ERROR(Name)      \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  }

DIARKIT_DEFINE_ERROR(FormatError);
DIARKIT_DEFINE_ERROR(UnsupportedFormatError);
DIARKIT_DEFINE_ERROR(PreconditionError);
DIARKIT_DEFINE_ERROR(ParameterError);
DIARKIT_DEFINE_ERROR(ShapeError);
DIARKIT_DEFINE_ERROR(EmptyInputError);
DIARKIT_DEFINE_ERROR(InputTooShortError);
DIARKIT_DEFINE_ERROR(NormalizationError);
DIARKIT_DEFINE_ERROR(NumericError);
DIARKIT_DEFINE_ERROR(DegenerateGraphError);
DIARKIT_DEFINE_ERROR(InsufficientSpeakersError);
DIARKIT_DEFINE_ERROR(InsufficientSpeechError);
DIARKIT_DEFINE_ERROR(InputError);
DIARKIT_DEFINE_ERROR(ConfigError);

#undef DIARKIT_DEFINE_ERROR

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace diarkit
