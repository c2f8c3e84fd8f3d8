#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace imchaos {

enum class Errc {
  DiagonalSingularity,
  InvalidWidth,
  AliasedGrid,
  NotPositive,
  IndexOutOfRange,
  GridMismatch,
  DivergentMoment,
  SupportTouchesBoundary,
  ZeroFunction,
  NoConvergence,
  DegeneratePerturbations,
  TargetTooLarge,
  NonUnimodalBracket,
  OrderOutOfRange,
  ArgumentOutOfRange,
  EmptyEnsemble,
  InvalidArgument,
  IoError,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DiagonalSingularity: return "DiagonalSingularity";
    case Errc::InvalidWidth: return "InvalidWidth";
    case Errc::AliasedGrid: return "AliasedGrid";
    case Errc::NotPositive: return "NotPositive";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::DivergentMoment: return "DivergentMoment";
    case Errc::SupportTouchesBoundary: return "SupportTouchesBoundary";
    case Errc::ZeroFunction: return "ZeroFunction";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::DegeneratePerturbations: return "DegeneratePerturbations";
    case Errc::TargetTooLarge: return "TargetTooLarge";
    case Errc::NonUnimodalBracket: return "NonUnimodalBracket";
    case Errc::OrderOutOfRange: return "OrderOutOfRange";
    case Errc::ArgumentOutOfRange: return "ArgumentOutOfRange";
    case Errc::EmptyEnsemble: return "EmptyEnsemble";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above; the
/// CLI maps them onto its structured error report.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return to_string(code_); }

 private:
  Errc code_;
};

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace imchaos
