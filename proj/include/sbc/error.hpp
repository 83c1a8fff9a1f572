#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sbc {

enum class Errc {
  // dataset
  MissingLabelColumn,
  MalformedRow,
  EmptyDataset,
  AllRowsDropped,
  InvalidFraction,
  // gbt
  SingleClassInput,
  EmptyData,
  DimensionMismatch,
  // cascade
  TooFewClasses,
  StageOutOfRange,
  PolicySourceEmpty,
  // hpo
  FoldDegenerate,
  ValueNotInGrid,
  // metrics
  LengthMismatch,
  LabelOutOfRange,
  // persistence / cli
  FingerprintMismatch,
  InvalidConfig,
  InvalidFormat,
  Io,
};

std::string_view to_string(Errc code) noexcept;

// Single exception type for the library. The code identifies the failure,
// `stage` is set when the error surfaced while training cascade stage i.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::optional<int> stage() const noexcept { return stage_; }

  // Re-throws `e` annotated with a cascade stage index.
  [[noreturn]] static void rethrow_with_stage(const Error& e, int stage);

 private:
  Error(Errc code, const std::string& full, int stage, bool)
      : std::runtime_error(full), code_(code), stage_(stage) {}

  Errc code_;
  std::optional<int> stage_;
};

}  // namespace sbc
