#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shiftnet {

enum class ErrorCode {
  InvalidArgument,
  Config,
  Io,
  NiftiMagic,
  NiftiDtype,
  NiftiDims,
  NiftiNotVector,
  CollinearLandmarks,
  InsufficientCorrespondences,
  DegenerateConfiguration,
  EmptyMask,
  BboxExceedsTarget,
  OutsideSupport,
  GeometryMismatch,
  DimsNotDivisible,
  StaleActivations,
  NonFiniteLoss,
  MissingLandmark,
  EmptyTrainFold,
  CkptFormat,
  CkptShape,
  Gradcheck,
};

// Stable upper-case identifier, e.g. "CKPT_SHAPE".
std::string_view code_name(ErrorCode code);

// True for errors caused by bad user input rather than a failure during work.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  Error(ErrorCode code, std::string field, const std::string& message);

  ErrorCode code() const noexcept { return code_; }
  // Offending field (header field, landmark name, loss term...), may be empty.
  const std::string& field() const noexcept { return field_; }

 private:
  ErrorCode code_;
  std::string field_;
};

}  // namespace shiftnet
