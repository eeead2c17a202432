#include "shiftnet/error.hpp"

namespace shiftnet {

std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::Config: return "CONFIG";
    case ErrorCode::Io: return "IO";
    case ErrorCode::NiftiMagic: return "NIFTI_MAGIC";
    case ErrorCode::NiftiDtype: return "NIFTI_DTYPE";
    case ErrorCode::NiftiDims: return "NIFTI_DIMS";
    case ErrorCode::NiftiNotVector: return "NIFTI_NOT_VECTOR";
    case ErrorCode::CollinearLandmarks: return "COLLINEAR_LANDMARKS";
    case ErrorCode::InsufficientCorrespondences: return "INSUFFICIENT_CORRESPONDENCES";
    case ErrorCode::DegenerateConfiguration: return "DEGENERATE_CONFIGURATION";
    case ErrorCode::EmptyMask: return "EMPTY_MASK";
    case ErrorCode::BboxExceedsTarget: return "BBOX_EXCEEDS_TARGET";
    case ErrorCode::OutsideSupport: return "OUTSIDE_SUPPORT";
    case ErrorCode::GeometryMismatch: return "GEOMETRY_MISMATCH";
    case ErrorCode::DimsNotDivisible: return "DIMS_NOT_DIVISIBLE";
    case ErrorCode::StaleActivations: return "STALE_ACTIVATIONS";
    case ErrorCode::NonFiniteLoss: return "NON_FINITE_LOSS";
    case ErrorCode::MissingLandmark: return "MISSING_LANDMARK";
    case ErrorCode::EmptyTrainFold: return "EMPTY_TRAIN_FOLD";
    case ErrorCode::CkptFormat: return "CKPT_FORMAT";
    case ErrorCode::CkptShape: return "CKPT_SHAPE";
    case ErrorCode::Gradcheck: return "GRADCHECK";
  }
  return "UNKNOWN";
}

bool is_validation_error(ErrorCode code) {
  return code == ErrorCode::InvalidArgument || code == ErrorCode::Config;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

Error::Error(ErrorCode code, std::string field, const std::string& message)
    : std::runtime_error(field.empty() ? message : field + ": " + message),
      code_(code),
      field_(std::move(field)) {}

}  // namespace shiftnet
