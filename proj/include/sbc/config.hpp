#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"

#include "sbc/cascade.hpp"
#include "sbc/dataset.hpp"
#include "sbc/gbt.hpp"
#include "sbc/hpo.hpp"

namespace sbc {

enum class Method { mcc, sbc };
enum class HpoMode { fixed, gs, hgs, phgs };

// Sample weighting as requested in a run. For mcc any non-none value means
// inverse class frequency over the training labels.
enum class WeightsMode { none, stage_inverse_frequency, class_inverse_frequency };

// One experiment column: dataset, method, tuning, weighting and seeds.
struct RunConfig {
  std::filesystem::path train_path;
  std::filesystem::path test_path;
  std::filesystem::path input_path;  // raw csv for `prepare`
  std::filesystem::path out_dir = "out";
  CsvOptions csv;
  CleaningPolicy cleaning;
  SplitSpec split;

  Method method = Method::sbc;
  HpoMode hpo = HpoMode::fixed;
  WeightsMode weights = WeightsMode::none;
  std::optional<GbtParams> params;  // required when hpo = fixed
  HpGrid grid;
  CvConfig cv;
  HalvingConfig halving;
  LastStagePolicy last_stage;
  double threshold = 0.5;
  UnknownAction unknown_action = UnknownAction::assign_last_class;
  std::uint64_t seed = 42;
  int threads = 1;

  // Throws InvalidConfig on inconsistent combinations.
  void validate() const;
  CascadeOptions cascade_options() const;
  WeightScheme mcc_weight_scheme() const;
  // Column label in the style "SBC + HGS + sample-weights".
  std::string label() const;
};

// Built-in grid used when a config names none.
HpGrid default_grid(const GbtParams& base);

// Reads a config document. Relative paths resolve against `base_dir`.
// A top-level "seed" seeds split, model, CV, halving and last-stage
// sampling unless those sections set their own.
RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Sets every derived seed from `seed`.
void apply_seed(RunConfig& c, std::uint64_t seed);

// Parses a method spec such as "mcc+gs", "sbc+hgs+sw" or "sbc+phgs".
void apply_method_spec(RunConfig& c, const std::string& spec);

std::string to_string(Method m);
std::string to_string(HpoMode m);
std::string to_string(WeightsMode m);
WeightsMode weights_mode_from_string(const std::string& s);

}  // namespace sbc
