#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hpt {

/// Every failure the toolkit reports carries one of these kinds; the CLI maps
/// them to named diagnostics.
enum class ErrorKind {
  kCycleDetected,
  kMultipleParents,
  kDisconnected,
  kUnknownScheme,
  kUnknownLabel,
  kIdOutOfRange,
  kLengthExceeded,
  kPositionOutOfRange,
  kTemplateOverflow,
  kLayerOutOfRange,
  kMissingVerbalizerMap,
  kDimensionMismatch,
  kMissingVirtualNode,
  kNonFiniteScore,
  kLayerMismatch,
  kEmptyPartition,
  kDivergedLoss,
  kEmptyDataset,
  kLabelOutsideUniverse,
  kFractionOutOfRange,
  kMalformedRecord,
  kInvalidConfig,
  kIoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hpt
