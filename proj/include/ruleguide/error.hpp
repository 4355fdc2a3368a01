#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ruleguide {

enum class Errc {
  UnbalancedBrackets,
  EmptyConstituent,
  MalformedToken,
  Unrepairable,
  NoTrees,
  LengthMismatch,
  LeafMismatch,
  NoCandidates,
  Precondition,
  Timeout,
  RateLimited,
  MissingReplay,
  BackendFailure,
  EmptySequence,
  Config,
  Io,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::UnbalancedBrackets: return "UnbalancedBrackets";
    case Errc::EmptyConstituent: return "EmptyConstituent";
    case Errc::MalformedToken: return "MalformedToken";
    case Errc::Unrepairable: return "Unrepairable";
    case Errc::NoTrees: return "NoTrees";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::LeafMismatch: return "LeafMismatch";
    case Errc::NoCandidates: return "NoCandidates";
    case Errc::Precondition: return "Precondition";
    case Errc::Timeout: return "Timeout";
    case Errc::RateLimited: return "RateLimited";
    case Errc::MissingReplay: return "MissingReplay";
    case Errc::BackendFailure: return "BackendFailure";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::Config: return "Config";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

// Every failure in the library is reported as an Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  bool is_backend() const noexcept {
    return code_ == Errc::Timeout || code_ == Errc::RateLimited ||
           code_ == Errc::MissingReplay || code_ == Errc::BackendFailure;
  }

 private:
  Errc code_;
};

}  // namespace ruleguide
