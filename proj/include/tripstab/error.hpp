#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tripstab {

enum class Errc {
  DimensionMismatch,
  TooFewPositives,
  EmptyNegatives,
  NonFiniteValue,
  SlotOutOfBounds,
  DuplicateSlot,
  PoolMismatch,
  InvalidConfig,
  NonpositiveBound,
  StepSizeTooLarge,
  BudgetExceeded,
  InvalidDelta,
  InvalidCounts,
  InvalidInputs,
  RegimeViolation,
  NonpositiveValue,
  TooFewPoints,
  Precondition,
  Parse,
  Io,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TooFewPositives: return "TooFewPositives";
    case Errc::EmptyNegatives: return "EmptyNegatives";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::SlotOutOfBounds: return "SlotOutOfBounds";
    case Errc::DuplicateSlot: return "DuplicateSlot";
    case Errc::PoolMismatch: return "PoolMismatch";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::NonpositiveBound: return "NonpositiveBound";
    case Errc::StepSizeTooLarge: return "StepSizeTooLarge";
    case Errc::BudgetExceeded: return "BudgetExceeded";
    case Errc::InvalidDelta: return "InvalidDelta";
    case Errc::InvalidCounts: return "InvalidCounts";
    case Errc::InvalidInputs: return "InvalidInputs";
    case Errc::RegimeViolation: return "RegimeViolation";
    case Errc::NonpositiveValue: return "NonpositiveValue";
    case Errc::TooFewPoints: return "TooFewPoints";
    case Errc::Precondition: return "Precondition";
    case Errc::Parse: return "Parse";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace tripstab
