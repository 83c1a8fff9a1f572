#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sbc/cascade.hpp"
#include "sbc/dataset.hpp"
#include "sbc/gbt.hpp"

namespace sbc {

// How a stage's search range may be bounded by its parent's best value.
enum class PruneDirection { upper_bound, lower_bound, unpruned };

struct HpAxis {
  std::string name;            // a GbtParams field name
  std::vector<double> values;  // strictly ascending
  PruneDirection prune = PruneDirection::unpruned;
};

// Cartesian grid over GbtParams fields. Axes are kept sorted by name, and
// candidates are enumerated with the first axis most significant.
class HpGrid {
 public:
  HpGrid() = default;
  explicit HpGrid(GbtParams base) : base_(base) {}

  // Adds or replaces an axis. Throws InvalidConfig on unknown names,
  // empty or non-ascending lists, or values GbtParams would reject.
  void set_axis(HpAxis axis);

  const std::vector<HpAxis>& axes() const noexcept { return axes_; }
  const HpAxis* axis(const std::string& name) const;
  const GbtParams& base() const noexcept { return base_; }

  std::size_t size() const;
  GbtParams candidate(std::size_t index) const;
  std::vector<GbtParams> candidates() const;

 private:
  GbtParams base_;
  std::vector<HpAxis> axes_;
};

PruneDirection default_prune_direction(const std::string& name);
// Value of a named GbtParams field as a double.
double param_value(const GbtParams& p, const std::string& name);
void set_param_value(GbtParams& p, const std::string& name, double value);

// Keeps candidates <= best (upper_bound) or >= best (lower_bound); the best
// value always survives. Throws ValueNotInGrid when best is not a candidate.
HpGrid prune_grid(const HpGrid& grid, const GbtParams& best_prev);

// {"base": {...}, "params": {"max_depth": {"values": [...], "prune": "upper_bound"}}}
HpGrid grid_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HpGrid& grid);
std::string to_string(PruneDirection d);

enum class CvMetric { macro_f1, accuracy };

struct CvConfig {
  int folds = 3;
  CvMetric metric = CvMetric::macro_f1;
  bool stratified = true;
  std::uint64_t seed = 0;
  int threads = 1;  // concurrent trials
};

struct HalvingConfig {
  int factor = 3;
  // Row budget of the first iteration; 0 picks the smallest budget that
  // reaches the full data on the last halving step.
  std::size_t min_resources = 0;
  std::uint64_t seed = 0;
};

// Per-row fold index in [0, folds).
std::vector<int> assign_folds(std::span<const ClassId> labels, const CvConfig& cv);

// Mean held-out score over the folds. Training weights come from
// `fixed_weights` when non-empty, otherwise from `scheme` applied to each
// fold's training labels. Throws FoldDegenerate when a held-out fold misses
// a class or a training part has fewer than two classes.
double cross_validate(const Dataset& data, const GbtParams& params, const CvConfig& cv, Objective objective,
                      WeightScheme scheme = WeightScheme::none, std::span<const double> fixed_weights = {});

double score_predictions(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes,
                         CvMetric metric);

struct Trial {
  std::size_t candidate = 0;  // enumeration index in the searched grid
  GbtParams params;
  int iteration = 0;
  std::size_t resources = 0;  // training rows
  double score = 0.0;
  double seconds = 0.0;
};

struct HpoResult {
  GbtParams best_params;
  std::size_t best_candidate = 0;
  double best_score = 0.0;
  std::vector<Trial> trials;
  double wall_clock = 0.0;
};

// Options shared by every search over one dataset.
struct SearchTask {
  Objective objective = Objective::multiclass_softmax;
  WeightScheme scheme = WeightScheme::none;
  std::vector<double> fixed_weights;  // overrides scheme when non-empty
};

HpoResult grid_search(const HpGrid& grid, const Dataset& data, const CvConfig& cv, const SearchTask& task);

struct HalvingIteration {
  std::size_t candidates = 0;
  std::size_t resources = 0;
};

// Candidate counts shrink to ceil(n / factor) and budgets grow by factor,
// capped at `full_resources`. A lone survivor is scored on the full data.
std::vector<HalvingIteration> halving_schedule(std::size_t n_candidates, const HalvingConfig& hc,
                                               std::size_t full_resources);

// First-iteration budget after resolving min_resources = 0.
std::size_t initial_resources(std::size_t n_candidates, const HalvingConfig& hc, std::size_t full_resources,
                              std::size_t floor_resources);

// Model-agnostic successive halving. `evaluate(candidate, iteration,
// resources)` returns a score, higher is better; score ties keep the earlier
// candidate. Returns the trials in evaluation order.
using HalvingEvaluator = std::function<double(std::size_t candidate, int iteration, std::size_t resources)>;
std::vector<Trial> successive_halving(std::size_t n_candidates, const HalvingConfig& hc, std::size_t full_resources,
                                      std::size_t floor_resources, const HalvingEvaluator& evaluate, int threads = 1);

HpoResult halving_grid_search(const HpGrid& grid, const Dataset& data, const CvConfig& cv, const HalvingConfig& hc,
                              const SearchTask& task);

// Stratified subsample of about `size` rows, ascending. Each class keeps
// at least min(count, per_class_floor) rows.
std::vector<std::size_t> stratified_subsample(std::span<const ClassId> labels, std::size_t size,
                                              std::size_t per_class_floor, std::uint64_t seed);

enum class SearchMethod { grid, halving, pruned_halving };

struct TunedCascade {
  SbcModel model;
  std::vector<HpoResult> stage_results;
  std::vector<HpGrid> stage_grids;  // grid actually searched at each stage
  double hpo_seconds = 0.0;
  double train_seconds = 0.0;
};

// Tunes every cascade stage on its own binarized view, then trains the
// cascade with the per-stage winners. pruned_halving searches stage i on
// prune_grid(stage i-1 grid, stage i-1 best).
TunedCascade tune_cascade(const Dataset& train, const ClassOrdering& ordering, const HpGrid& grid,
                          SearchMethod method, const CvConfig& cv, const HalvingConfig& hc,
                          const CascadeOptions& options);

inline TunedCascade phgs_cascade(const Dataset& train, const ClassOrdering& ordering, const HpGrid& grid,
                                 const CvConfig& cv, const HalvingConfig& hc, const CascadeOptions& options) {
  return tune_cascade(train, ordering, grid, SearchMethod::pruned_halving, cv, hc, options);
}

nlohmann::json to_json(const HpoResult& result);
std::string to_string(SearchMethod m);

}  // namespace sbc
