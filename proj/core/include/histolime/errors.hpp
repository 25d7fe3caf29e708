#pragma once

#include <stdexcept>
#include <string>

namespace histolime {

/// Coarse classification of failures. The CLI maps these onto exit codes.
enum class ErrorKind {
  Input,     // malformed data, missing files, bad arguments
  Backend,   // model loading or prediction failures
  Numerical  // segmentation or solver failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define HISTOLIME_DEFINE_ERROR(Name, Kind)                      \
  class Name : public Error {                                   \
   public:                                                      \
    explicit Name(const std::string& what)                      \
        : Error(ErrorKind::Kind, #Name ": " + what) {}          \
  };

// imaging
HISTOLIME_DEFINE_ERROR(DecodeError, Input)
HISTOLIME_DEFINE_ERROR(UnsupportedFormat, Input)
HISTOLIME_DEFINE_ERROR(EncodeError, Input)
HISTOLIME_DEFINE_ERROR(InvalidAugmentSpec, Input)

// dataset
HISTOLIME_DEFINE_ERROR(MissingClassDirectory, Input)
HISTOLIME_DEFINE_ERROR(EmptyCorpus, Input)
HISTOLIME_DEFINE_ERROR(BadRatios, Input)
HISTOLIME_DEFINE_ERROR(ManifestParseError, Input)

// classifier gateway
HISTOLIME_DEFINE_ERROR(ManifestError, Input)
HISTOLIME_DEFINE_ERROR(BackendUnavailable, Backend)
HISTOLIME_DEFINE_ERROR(BackendFailure, Backend)
HISTOLIME_DEFINE_ERROR(ShapeError, Input)

// metrics
HISTOLIME_DEFINE_ERROR(LengthMismatch, Input)
HISTOLIME_DEFINE_ERROR(UndefinedMetric, Numerical)

// lime
HISTOLIME_DEFINE_ERROR(SegmentationError, Numerical)
HISTOLIME_DEFINE_ERROR(SingularSystem, Numerical)

#undef HISTOLIME_DEFINE_ERROR

}  // namespace histolime
