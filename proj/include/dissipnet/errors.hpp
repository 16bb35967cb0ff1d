#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dissipnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define DISSIPNET_ERROR(Name)                 \
  class Name : public Error {                 \
   public:                                    \
    explicit Name(const std::string& what)    \
        : Error(#Name ": " + what) {}         \
  };

DISSIPNET_ERROR(NotSymmetric)
DISSIPNET_ERROR(NotPSD)
DISSIPNET_ERROR(RankDeficient)
DISSIPNET_ERROR(DimensionMismatch)
DISSIPNET_ERROR(TapeMismatch)
DISSIPNET_ERROR(InvalidPreset)
DISSIPNET_ERROR(ConfigError)
DISSIPNET_ERROR(FormatError)
DISSIPNET_ERROR(MissingEta)
DISSIPNET_ERROR(MissingStates)
DISSIPNET_ERROR(IoError)

#undef DISSIPNET_ERROR

// Raised when an integrated state leaves the finite range; `step` is the grid
// index at which the offending state was produced.
class NonFiniteState : public Error {
 public:
  NonFiniteState(std::size_t step, const std::string& what)
      : Error("NonFiniteState at step " + std::to_string(step) + ": " + what),
        step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace dissipnet
