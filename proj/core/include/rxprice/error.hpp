#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rxprice {

enum class ErrorCode {
  kInvalidArgument,
  kEmptyBlock,
  kNonFinite,
  kEmptyPriceRange,
  kBudgetExceeded,
  kTooLarge,
  kBadPartition,
  kSchemaMismatch,
  kTooFewRows,
  kUnknownSession,
  kUnknownMarket,
  kMalformedCompletion,
  kClientTimeout,
  kIo,
};

std::string_view ErrorCodeName(ErrorCode code);

// All recoverable failures in the library are reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace rxprice
