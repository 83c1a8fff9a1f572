#include "sbc/config.hpp"

#include <fstream>
#include <sstream>

#include "sbc/error.hpp"

namespace sbc {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& value, const std::pair<const char*, Enum> (&table)[N], const char* what) {
  for (const auto& [name, e] : table) {
    if (value == name) return e;
  }
  throw Error(Errc::InvalidConfig, std::string("unknown ") + what + " '" + value + "'");
}

template <typename Enum, std::size_t N>
std::string enum_name(Enum e, const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [name, v] : table) {
    if (v == e) return name;
  }
  return "?";
}

const std::pair<const char*, MissingValueAction> kMissing[] = {{"drop_row", MissingValueAction::drop_row},
                                                               {"impute_zero", MissingValueAction::impute_zero},
                                                               {"impute_median", MissingValueAction::impute_median}};
const std::pair<const char*, InfinityAction> kInfinity[] = {{"drop_row", InfinityAction::drop_row},
                                                            {"clamp_to_finite_max", InfinityAction::clamp_to_finite_max}};
const std::pair<const char*, NegativeAction> kNegative[] = {{"keep", NegativeAction::keep},
                                                            {"drop_row", NegativeAction::drop_row},
                                                            {"clamp_zero", NegativeAction::clamp_zero}};
const std::pair<const char*, Method> kMethod[] = {{"mcc", Method::mcc}, {"sbc", Method::sbc}};
const std::pair<const char*, HpoMode> kHpo[] = {
    {"fixed", HpoMode::fixed}, {"gs", HpoMode::gs}, {"hgs", HpoMode::hgs}, {"phgs", HpoMode::phgs}};
const std::pair<const char*, CvMetric> kMetric[] = {{"macro_f1", CvMetric::macro_f1}, {"accuracy", CvMetric::accuracy}};

}  // namespace

std::string to_string(Method m) { return enum_name(m, kMethod); }
std::string to_string(HpoMode m) { return enum_name(m, kHpo); }

std::string to_string(WeightsMode m) {
  switch (m) {
    case WeightsMode::none: return "none";
    case WeightsMode::stage_inverse_frequency: return "stage_inverse_frequency";
    case WeightsMode::class_inverse_frequency: return "class_inverse_frequency";
  }
  return "none";
}

WeightsMode weights_mode_from_string(const std::string& s) {
  if (s == "none") return WeightsMode::none;
  if (s == "inverse_frequency" || s == "stage_inverse_frequency" || s == "per_stage_inverse_frequency") {
    return WeightsMode::stage_inverse_frequency;
  }
  if (s == "class_inverse_frequency") return WeightsMode::class_inverse_frequency;
  throw Error(Errc::InvalidConfig, "unknown weights mode '" + s + "'");
}

HpGrid default_grid(const GbtParams& base) {
  HpGrid g(base);
  g.set_axis({"learning_rate", {0.1, 0.3}, PruneDirection::unpruned});
  g.set_axis({"max_depth", {3, 5, 7}, PruneDirection::upper_bound});
  g.set_axis({"num_rounds", {50, 100}, PruneDirection::upper_bound});
  return g;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(Errc::InvalidConfig, m); };
  if (hpo == HpoMode::phgs && method != Method::sbc) fail("phgs tuning requires method sbc");
  if (hpo == HpoMode::fixed && !params) fail("hpo 'fixed' requires explicit model params");
  if (params) params->validate();
  if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0, 1)");
  if (cv.folds < 2) fail("cv.folds must be at least 2");
  if (halving.factor < 2) fail("halving.factor must be at least 2");
  if (threads < 1) fail("threads must be at least 1");
  if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) fail("split.test_fraction must lie in (0, 1)");
  if (!(last_stage.negatives_per_positive > 0.0)) fail("last_stage.negatives_per_positive must be positive");
  if (hpo != HpoMode::fixed && grid.axes().empty()) fail("tuning needs a grid with at least one axis");
}

CascadeOptions RunConfig::cascade_options() const {
  CascadeOptions o;
  o.last_stage = last_stage;
  o.default_threshold = threshold;
  switch (weights) {
    case WeightsMode::none: o.weights = CascadeWeights::none; break;
    case WeightsMode::stage_inverse_frequency: o.weights = CascadeWeights::stage_inverse_frequency; break;
    case WeightsMode::class_inverse_frequency: o.weights = CascadeWeights::class_inverse_frequency; break;
  }
  return o;
}

WeightScheme RunConfig::mcc_weight_scheme() const {
  return weights == WeightsMode::none ? WeightScheme::none : WeightScheme::inverse_frequency;
}

std::string RunConfig::label() const {
  std::string s = method == Method::mcc ? "MCC" : "SBC";
  switch (hpo) {
    case HpoMode::fixed: s += " + fixed"; break;
    case HpoMode::gs: s += " + GS"; break;
    case HpoMode::hgs: s += " + HGS"; break;
    case HpoMode::phgs: s += " + pHGS"; break;
  }
  if (weights != WeightsMode::none) s += " + sample-weights";
  return s;
}

void apply_seed(RunConfig& c, std::uint64_t seed) {
  c.seed = seed;
  c.split.seed = seed;
  c.cv.seed = seed;
  c.halving.seed = seed;
  c.last_stage.seed = seed;
  if (c.params) c.params->seed = seed;
  GbtParams base = c.grid.base();
  base.seed = seed;
  HpGrid g(base);
  for (const auto& a : c.grid.axes()) g.set_axis(a);
  c.grid = std::move(g);
}

void apply_method_spec(RunConfig& c, const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string tok; std::getline(ss, tok, '+');) {
    if (!tok.empty()) parts.push_back(tok);
  }
  if (parts.empty()) throw Error(Errc::InvalidConfig, "empty method spec");
  c.method = parse_enum(parts[0], kMethod, "method");
  c.hpo = parts.size() > 1 ? parse_enum(parts[1], kHpo, "hpo mode") : HpoMode::fixed;
  c.weights = WeightsMode::none;
  for (std::size_t i = 2; i < parts.size(); ++i) {
    if (parts[i] == "sw" || parts[i] == "weights") c.weights = WeightsMode::stage_inverse_frequency;
    else if (parts[i] == "cw") c.weights = WeightsMode::class_inverse_frequency;
    else throw Error(Errc::InvalidConfig, "unknown method modifier '" + parts[i] + "' in '" + spec + "'");
  }
}

RunConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  RunConfig c;
  try {
    if (j.contains("grid_file")) {
      std::ifstream in(resolve(base_dir, j.at("grid_file").get<std::string>()));
      if (!in) throw Error(Errc::InvalidConfig, "cannot open grid file " + j.at("grid_file").get<std::string>());
      c.grid = grid_from_json(nlohmann::json::parse(in));
    } else if (j.contains("grid")) {
      c.grid = grid_from_json(j.at("grid"));
    } else {
      c.grid = default_grid(GbtParams{});
    }
    if (j.contains("params")) c.params = gbt_params_from_json(j.at("params"));
    apply_seed(c, j.value("seed", c.seed));
    if (c.params && j.at("params").contains("seed")) c.params->seed = j.at("params").at("seed").get<std::uint64_t>();

    if (j.contains("train")) c.train_path = resolve(base_dir, j.at("train").get<std::string>());
    if (j.contains("test")) c.test_path = resolve(base_dir, j.at("test").get<std::string>());
    if (j.contains("input")) c.input_path = resolve(base_dir, j.at("input").get<std::string>());
    if (j.contains("out")) c.out_dir = resolve(base_dir, j.at("out").get<std::string>());

    if (j.contains("csv")) {
      const auto& s = j.at("csv");
      c.csv.label_column = s.value("label_column", c.csv.label_column);
      c.csv.header = s.value("header", c.csv.header);
      c.csv.missing_tokens = s.value("missing_tokens", c.csv.missing_tokens);
      c.csv.ignore_columns = s.value("ignore_columns", c.csv.ignore_columns);
      const auto delim = s.value("delimiter", std::string(","));
      if (delim.size() != 1) throw Error(Errc::InvalidConfig, "csv.delimiter must be one character");
      c.csv.delimiter = delim[0];
    }
    if (j.contains("cleaning")) {
      const auto& s = j.at("cleaning");
      c.cleaning.drop_duplicates = s.value("drop_duplicates", c.cleaning.drop_duplicates);
      if (s.contains("missing")) c.cleaning.missing_value_action = parse_enum(s.at("missing").get<std::string>(), kMissing, "missing action");
      if (s.contains("infinity")) c.cleaning.infinity_action = parse_enum(s.at("infinity").get<std::string>(), kInfinity, "infinity action");
      if (s.contains("negative")) c.cleaning.negative_action = parse_enum(s.at("negative").get<std::string>(), kNegative, "negative action");
      c.cleaning.negative_columns = s.value("negative_columns", c.cleaning.negative_columns);
    }
    if (j.contains("split")) {
      const auto& s = j.at("split");
      c.split.test_fraction = s.value("test_fraction", c.split.test_fraction);
      c.split.stratified = s.value("stratified", c.split.stratified);
      c.split.seed = s.value("seed", c.split.seed);
    }
    if (j.contains("method")) c.method = parse_enum(j.at("method").get<std::string>(), kMethod, "method");
    if (j.contains("hpo")) c.hpo = parse_enum(j.at("hpo").get<std::string>(), kHpo, "hpo mode");
    if (j.contains("weights")) c.weights = weights_mode_from_string(j.at("weights").get<std::string>());
    if (j.contains("cv")) {
      const auto& s = j.at("cv");
      c.cv.folds = s.value("folds", c.cv.folds);
      c.cv.stratified = s.value("stratified", c.cv.stratified);
      c.cv.seed = s.value("seed", c.cv.seed);
      if (s.contains("metric")) c.cv.metric = parse_enum(s.at("metric").get<std::string>(), kMetric, "cv metric");
    }
    if (j.contains("halving")) {
      const auto& s = j.at("halving");
      c.halving.factor = s.value("factor", c.halving.factor);
      c.halving.min_resources = s.value("min_resources", c.halving.min_resources);
      c.halving.seed = s.value("seed", c.halving.seed);
    }
    if (j.contains("last_stage")) {
      const auto& s = j.at("last_stage");
      if (s.contains("source")) c.last_stage.source = negative_source_from_string(s.at("source").get<std::string>());
      c.last_stage.negatives_per_positive = s.value("negatives_per_positive", c.last_stage.negatives_per_positive);
      c.last_stage.seed = s.value("seed", c.last_stage.seed);
    }
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("unknown_action")) c.unknown_action = unknown_action_from_string(j.at("unknown_action").get<std::string>());
    c.threads = j.value("threads", c.threads);
    c.cv.threads = c.threads;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("malformed config: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j = {
      {"train", c.train_path.string()},
      {"test", c.test_path.string()},
      {"csv", {{"label_column", c.csv.label_column}, {"header", c.csv.header},
               {"missing_tokens", c.csv.missing_tokens}, {"ignore_columns", c.csv.ignore_columns}}},
      {"split", {{"test_fraction", c.split.test_fraction}, {"stratified", c.split.stratified}, {"seed", c.split.seed}}},
      {"method", to_string(c.method)},
      {"hpo", to_string(c.hpo)},
      {"weights", to_string(c.weights)},
      {"grid", to_json(c.grid)},
      {"cv", {{"folds", c.cv.folds}, {"metric", enum_name(c.cv.metric, kMetric)}, {"stratified", c.cv.stratified},
              {"seed", c.cv.seed}}},
      {"halving", {{"factor", c.halving.factor}, {"min_resources", c.halving.min_resources}, {"seed", c.halving.seed}}},
      {"last_stage", {{"source", to_string(c.last_stage.source)},
                      {"negatives_per_positive", c.last_stage.negatives_per_positive},
                      {"seed", c.last_stage.seed}}},
      {"threshold", c.threshold},
      {"unknown_action", to_string(c.unknown_action)},
      {"seed", c.seed}};
  if (c.params) j["params"] = to_json(*c.params);
  return j;
}

}  // namespace sbc
