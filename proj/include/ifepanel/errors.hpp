#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ifepanel {

enum class ErrorKind {
  InvalidArgument,
  DimensionMismatch,
  ParseError,
  UnbalancedPanel,
  DuplicateCell,
  LagTooLarge,
  InvalidM,
  InvalidMMax,
  NotSymmetric,
  RankDeficientDesign,
  RequiresConvergedILS,
  TooManyCsaColumns,
  WeakInstrument,
  InvalidGrid,
  InvalidG,
  InvalidGamma,
  RequiresNGreaterT,
  DegenerateRows,
  DegenerateTheta,
  DegenerateCSA,
  NegativeQuadForm,
  InvalidSpec,
  ConfigError,
  IOError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace ifepanel
