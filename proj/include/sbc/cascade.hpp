#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

#include "sbc/dataset.hpp"
#include "sbc/gbt.hpp"

namespace sbc {

// Bijection between class ids and frequency ranks. class_at[0] is the most
// frequent class; equal counts rank the lower class id first.
struct ClassOrdering {
  std::map<ClassId, int> rank_of;
  std::vector<ClassId> class_at;

  std::size_t size() const noexcept { return class_at.size(); }
  int rank(ClassId c) const;
};

ClassOrdering order_classes(const std::map<ClassId, std::size_t>& freqs);

// Binarized training subset of one cascade stage.
struct StageView {
  int stage = 0;
  std::vector<std::size_t> row_indices;  // ascending indices into the training set
  std::vector<int> binary_labels;        // 1 for the stage's class

  std::size_t size() const noexcept { return row_indices.size(); }
  std::size_t positives() const;
};

// Stage i < n-1: positives are class_at[i], negatives every rarer class.
StageView binarize_stage(const Dataset& train, const ClassOrdering& ordering, int stage);

enum class NegativeSource { majority_only, all_others };

struct LastStagePolicy {
  NegativeSource source = NegativeSource::majority_only;
  double negatives_per_positive = 1.0;
  std::uint64_t seed = 0;
};

// Positives are all rows of the rarest class; negatives are drawn without
// replacement from the policy source, min(available, round(ratio * positives)).
StageView last_stage_view(const Dataset& train, const ClassOrdering& ordering, const LastStagePolicy& policy);

// Stage view for any stage index, dispatching to the last-stage sampler.
StageView stage_view(const Dataset& train, const ClassOrdering& ordering, int stage,
                     const LastStagePolicy& policy);

// Binary dataset for a stage: rows of the view, class names {"rest", <class>}.
Dataset materialize(const Dataset& train, const StageView& view, const ClassOrdering& ordering);

enum class CascadeWeights {
  none,
  // inverse frequency of the stage's positive/negative labels
  stage_inverse_frequency,
  // inverse frequency of the original classes, restricted to the stage rows
  class_inverse_frequency,
};

std::vector<double> stage_weights(const Dataset& train, const StageView& view, CascadeWeights mode);

struct StageMetadata {
  std::size_t train_rows = 0;
  std::size_t positives = 0;
  double train_seconds = 0.0;
};

struct SbcModel {
  ClassOrdering ordering;
  std::vector<GbtModel> stages;
  std::vector<double> thresholds;
  LastStagePolicy last_stage_policy;
  CascadeWeights weights = CascadeWeights::none;
  std::vector<StageMetadata> metadata;

  std::size_t num_stages() const noexcept { return stages.size(); }
  std::size_t num_features() const noexcept { return stages.empty() ? 0 : stages.front().n_features; }
};

struct CascadeOptions {
  CascadeWeights weights = CascadeWeights::none;
  LastStagePolicy last_stage;
  double default_threshold = 0.5;
};

// `params_per_stage` has one entry per class, or a single entry that is
// broadcast to every stage.
SbcModel train_cascade(const Dataset& train, const ClassOrdering& ordering,
                       std::span<const GbtParams> params_per_stage, const CascadeOptions& options);

struct StageEvaluation {
  int stage = 0;
  double probability = 0.0;
  friend bool operator==(const StageEvaluation&, const StageEvaluation&) = default;
};

struct Prediction {
  std::optional<ClassId> known;  // empty means Unknown
  std::vector<StageEvaluation> trace;

  bool is_unknown() const noexcept { return !known.has_value(); }
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Walks stages 0, 1, ... and stops at the first stage whose probability
// reaches its threshold.
Prediction predict(const SbcModel& model, std::span<const double> x);

enum class UnknownAction { emit_unknown, assign_last_class };

// Stage-by-stage batch evaluation; each stage sees only the rows every
// earlier stage rejected.
std::vector<Prediction> predict_batch(const SbcModel& model, const Matrix& X, UnknownAction action);

// Class ids of a prediction batch; Unknown becomes kUnknownLabel.
constexpr int kUnknownLabel = -1;
std::vector<int> to_labels(std::span<const Prediction> predictions);

nlohmann::json to_json(const SbcModel& model);
SbcModel sbc_from_json(const nlohmann::json& j);

std::string to_string(CascadeWeights w);
CascadeWeights cascade_weights_from_string(const std::string& s);
std::string to_string(NegativeSource s);
NegativeSource negative_source_from_string(const std::string& s);
std::string to_string(UnknownAction a);
UnknownAction unknown_action_from_string(const std::string& s);

}  // namespace sbc
