#pragma once

#include <stdexcept>
#include <string>

namespace icc {

/// Coarse classification used by the command line tool to pick an exit code.
enum class ErrorKind { kUsage, kData, kRuntime };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define ICC_DEFINE_ERROR(Name, Kind)                                           \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string& what) : Error(Kind, #Name ": " + what) {} \
  };

// data model
ICC_DEFINE_ERROR(MalformedFile, ErrorKind::kData)
ICC_DEFINE_ERROR(NonFiniteData, ErrorKind::kData)
ICC_DEFINE_ERROR(UnknownAction, ErrorKind::kData)
ICC_DEFINE_ERROR(LengthMismatch, ErrorKind::kData)
ICC_DEFINE_ERROR(TooFewVideos, ErrorKind::kData)
ICC_DEFINE_ERROR(BadSpec, ErrorKind::kData)
ICC_DEFINE_ERROR(IoError, ErrorKind::kData)
ICC_DEFINE_ERROR(CheckpointVersionMismatch, ErrorKind::kData)

// network / training
ICC_DEFINE_ERROR(ShapeError, ErrorKind::kRuntime)
ICC_DEFINE_ERROR(TooFewFrames, ErrorKind::kRuntime)
ICC_DEFINE_ERROR(NoValidAnchors, ErrorKind::kRuntime)
ICC_DEFINE_ERROR(EmptyLabeledSet, ErrorKind::kData)
ICC_DEFINE_ERROR(MissingLabels, ErrorKind::kData)
ICC_DEFINE_ERROR(EmptySequence, ErrorKind::kData)
ICC_DEFINE_ERROR(InvalidArgument, ErrorKind::kUsage)

#undef ICC_DEFINE_ERROR

}  // namespace icc
