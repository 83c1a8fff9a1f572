#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sbc/matrix.hpp"

namespace sbc {

using ClassId = int;

// Labeled tabular data. Values are immutable once a Dataset has been handed
// to the rest of the pipeline; operations return new instances.
struct Dataset {
  Matrix features;
  std::vector<ClassId> labels;
  std::vector<std::string> class_names;
  std::vector<std::string> feature_names;
  std::string label_name = "label";

  std::size_t rows() const noexcept { return labels.size(); }
  std::size_t num_features() const noexcept { return features.cols(); }
  std::size_t num_classes() const noexcept { return class_names.size(); }

  // Rows gathered in the order of `indices`; class and feature names are kept.
  Dataset subset(std::span<const std::size_t> indices) const;

  // Throws InvalidFormat if row counts disagree or a label is out of range.
  void validate() const;
};

struct CsvOptions {
  std::string label_column = "label";
  bool header = true;
  char delimiter = ',';
  // Cells equal to one of these tokens load as missing (NaN).
  std::vector<std::string> missing_tokens = {"", "NaN"};
  // Columns dropped before parsing (identifiers, textual metadata).
  std::vector<std::string> ignore_columns;
};

// Class names are encoded in order of first appearance. Without a header the
// label column is addressed by its zero-based index and features are named
// f0, f1, ...
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset parse_csv(std::string_view text, const CsvOptions& options = {});

// Writes features followed by the label column, with a header row. Values
// use the shortest representation that round-trips exactly.
std::string to_csv(const Dataset& d);
void save_csv(const Dataset& d, const std::filesystem::path& path);

// Feature-only table, e.g. rows to classify. A label column, when present,
// is ignored.
struct FeatureTable {
  Matrix features;
  std::vector<std::string> feature_names;
};
FeatureTable load_feature_csv(const std::filesystem::path& path, const CsvOptions& options = {});
FeatureTable parse_feature_csv(std::string_view text, const CsvOptions& options = {});

enum class MissingValueAction { drop_row, impute_zero, impute_median };
enum class InfinityAction { drop_row, clamp_to_finite_max };
enum class NegativeAction { keep, drop_row, clamp_zero };

struct CleaningPolicy {
  bool drop_duplicates = true;
  MissingValueAction missing_value_action = MissingValueAction::drop_row;
  InfinityAction infinity_action = InfinityAction::drop_row;
  NegativeAction negative_action = NegativeAction::drop_row;
  // Features the negative action applies to; empty means every feature.
  std::vector<std::string> negative_columns;
};

struct CleaningReport {
  std::size_t rows_in = 0;
  std::size_t rows_out = 0;
  std::size_t duplicates_dropped = 0;
  std::size_t missing_rows_dropped = 0;
  std::size_t missing_cells_imputed = 0;
  std::size_t infinity_rows_dropped = 0;
  std::size_t infinity_cells_clamped = 0;
  std::size_t negative_rows_dropped = 0;
  std::size_t negative_cells_clamped = 0;

  // "key: count" lines.
  std::string to_text() const;
};

struct CleanResult {
  Dataset data;
  CleaningReport report;
};

// Survivors keep their relative order. Throws AllRowsDropped when nothing
// survives.
CleanResult clean(const Dataset& d, const CleaningPolicy& policy);

struct SplitSpec {
  double test_fraction = 0.1;
  std::uint64_t seed = 42;
  bool stratified = true;
};

struct SplitResult {
  Dataset train;
  Dataset test;
  std::vector<std::string> warnings;
};

// Per class c the test share is round-half-up(count_c * test_fraction),
// clamped so that every class keeps at least one training row. Both halves
// preserve the input row order and keep the full class name list.
SplitResult stratified_split(const Dataset& d, const SplitSpec& spec);

// Counts of classes that occur in `labels`, keyed by class id.
std::map<ClassId, std::size_t> class_frequencies(std::span<const ClassId> labels);
inline std::map<ClassId, std::size_t> class_frequencies(const Dataset& d) {
  return class_frequencies(d.labels);
}

enum class WeightScheme { none, inverse_frequency };

// Per-row positive weights. Under inverse_frequency class c gets
// N / (K * n_c), K being the number of distinct classes present.
std::vector<double> compute_sample_weights(std::span<const ClassId> labels, WeightScheme scheme);

}  // namespace sbc
