#include "sbc/error.hpp"

namespace sbc {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingLabelColumn: return "MissingLabelColumn";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::AllRowsDropped: return "AllRowsDropped";
    case Errc::InvalidFraction: return "InvalidFraction";
    case Errc::SingleClassInput: return "SingleClassInput";
    case Errc::EmptyData: return "EmptyData";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::TooFewClasses: return "TooFewClasses";
    case Errc::StageOutOfRange: return "StageOutOfRange";
    case Errc::PolicySourceEmpty: return "PolicySourceEmpty";
    case Errc::FoldDegenerate: return "FoldDegenerate";
    case Errc::ValueNotInGrid: return "ValueNotInGrid";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::FingerprintMismatch: return "FingerprintMismatch";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::InvalidFormat: return "InvalidFormat";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

void Error::rethrow_with_stage(const Error& e, int stage) {
  throw Error(e.code(), "stage " + std::to_string(stage) + ": " + e.what(), stage, true);
}

}  // namespace sbc
