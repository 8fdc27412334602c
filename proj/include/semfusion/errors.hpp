#pragma once

#include <stdexcept>
#include <string>

namespace semfusion {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SEMFUSION_DEFINE_ERROR(Name)          \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  };

// geometry-core
SEMFUSION_DEFINE_ERROR(InvalidDepthError)
SEMFUSION_DEFINE_ERROR(BehindCameraError)
SEMFUSION_DEFINE_ERROR(DimensionError)

// dataset-io
SEMFUSION_DEFINE_ERROR(MissingFileError)
SEMFUSION_DEFINE_ERROR(ShapeMismatchError)
SEMFUSION_DEFINE_ERROR(ProbabilityRangeError)
SEMFUSION_DEFINE_ERROR(IoError)

// registration
SEMFUSION_DEFINE_ERROR(InsufficientCorrespondencesError)
SEMFUSION_DEFINE_ERROR(TrackingLostError)

// instance fusion
SEMFUSION_DEFINE_ERROR(InvalidDistributionError)

// evaluation
SEMFUSION_DEFINE_ERROR(InsufficientOverlapError)
SEMFUSION_DEFINE_ERROR(RegistrationFailureError)

#undef SEMFUSION_DEFINE_ERROR

/// Parse failure carrying the offending file and 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, int line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), file_(file), line_(line) {}

  const std::string& file() const noexcept { return file_; }
  int line() const noexcept { return line_; }

 private:
  std::string file_;
  int line_;
};

}  // namespace semfusion
