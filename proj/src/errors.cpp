#include "ifepanel/errors.hpp"

namespace ifepanel {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorKind::DuplicateCell: return "DuplicateCell";
    case ErrorKind::LagTooLarge: return "LagTooLarge";
    case ErrorKind::InvalidM: return "InvalidM";
    case ErrorKind::InvalidMMax: return "InvalidMMax";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::RankDeficientDesign: return "RankDeficientDesign";
    case ErrorKind::RequiresConvergedILS: return "RequiresConvergedILS";
    case ErrorKind::TooManyCsaColumns: return "TooManyCsaColumns";
    case ErrorKind::WeakInstrument: return "WeakInstrument";
    case ErrorKind::InvalidGrid: return "InvalidGrid";
    case ErrorKind::InvalidG: return "InvalidG";
    case ErrorKind::InvalidGamma: return "InvalidGamma";
    case ErrorKind::RequiresNGreaterT: return "RequiresNGreaterT";
    case ErrorKind::DegenerateRows: return "DegenerateRows";
    case ErrorKind::DegenerateTheta: return "DegenerateTheta";
    case ErrorKind::DegenerateCSA: return "DegenerateCSA";
    case ErrorKind::NegativeQuadForm: return "NegativeQuadForm";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IOError: return "IOError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace ifepanel
