#include "sbc/error.hpp"
#include "sbc/gbt.hpp"

namespace sbc {

namespace {

constexpr int kGbtFormatVersion = 1;

template <typename T>
std::vector<T> read_array(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw Error(Errc::InvalidFormat, std::string("tree is missing '") + key + "'");
  return j.at(key).get<std::vector<T>>();
}

}  // namespace

std::string to_string(Objective objective) {
  return objective == Objective::binary_logistic ? "binary_logistic" : "multiclass_softmax";
}

nlohmann::json to_json(const GbtParams& p) {
  return {{"num_rounds", p.num_rounds},         {"learning_rate", p.learning_rate},
          {"max_depth", p.max_depth},           {"min_child_weight", p.min_child_weight},
          {"l2_lambda", p.l2_lambda},           {"subsample", p.subsample},
          {"seed", p.seed}};
}

GbtParams gbt_params_from_json(const nlohmann::json& j) {
  GbtParams p;
  p.num_rounds = j.value("num_rounds", p.num_rounds);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.max_depth = j.value("max_depth", p.max_depth);
  p.min_child_weight = j.value("min_child_weight", p.min_child_weight);
  p.l2_lambda = j.value("l2_lambda", p.l2_lambda);
  p.subsample = j.value("subsample", p.subsample);
  p.seed = j.value("seed", p.seed);
  p.validate();
  return p;
}

nlohmann::json to_json(const GbtModel& model) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& t : model.trees) {
    trees.push_back({{"left", t.left},
                     {"right", t.right},
                     {"feature", t.feature},
                     {"threshold", t.threshold},
                     {"default_left", t.default_left},
                     {"value", t.value},
                     {"hessian_sum", t.hessian_sum},
                     {"depth", t.depth}});
  }
  return {{"format", "sbc.gbt"},
          {"version", kGbtFormatVersion},
          {"objective", to_string(model.objective)},
          {"n_classes", model.n_classes},
          {"n_features", model.n_features},
          {"base_score", model.base_score},
          {"params", to_json(model.params)},
          {"trees", std::move(trees)}};
}

GbtModel gbt_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "sbc.gbt") throw Error(Errc::InvalidFormat, "not a GBT model document");
    if (j.at("version").get<int>() != kGbtFormatVersion) {
      throw Error(Errc::InvalidFormat, "unsupported GBT model version " + j.at("version").dump());
    }
    GbtModel m;
    const auto objective = j.at("objective").get<std::string>();
    if (objective == "binary_logistic") m.objective = Objective::binary_logistic;
    else if (objective == "multiclass_softmax") m.objective = Objective::multiclass_softmax;
    else throw Error(Errc::InvalidFormat, "unknown objective '" + objective + "'");
    m.n_classes = j.at("n_classes").get<int>();
    m.n_features = j.at("n_features").get<std::size_t>();
    m.base_score = j.at("base_score").get<std::vector<double>>();
    m.params = gbt_params_from_json(j.at("params"));
    for (const auto& jt : j.at("trees")) {
      Tree t;
      t.left = read_array<int>(jt, "left");
      t.right = read_array<int>(jt, "right");
      t.feature = read_array<int>(jt, "feature");
      t.threshold = read_array<double>(jt, "threshold");
      t.default_left = read_array<std::uint8_t>(jt, "default_left");
      t.value = read_array<double>(jt, "value");
      t.hessian_sum = read_array<double>(jt, "hessian_sum");
      t.depth = read_array<int>(jt, "depth");
      const std::size_t n = t.left.size();
      if (n == 0 || t.right.size() != n || t.feature.size() != n || t.threshold.size() != n ||
          t.default_left.size() != n || t.value.size() != n || t.hessian_sum.size() != n || t.depth.size() != n) {
        throw Error(Errc::InvalidFormat, "tree arrays have inconsistent lengths");
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (t.left[i] < 0) continue;
        if (static_cast<std::size_t>(t.left[i]) >= n || t.right[i] < 0 || static_cast<std::size_t>(t.right[i]) >= n ||
            t.feature[i] < 0 || static_cast<std::size_t>(t.feature[i]) >= m.n_features) {
          throw Error(Errc::InvalidFormat, "tree node " + std::to_string(i) + " has invalid links");
        }
      }
      m.trees.push_back(std::move(t));
    }
    if (m.base_score.size() != m.groups() || m.trees.size() % m.groups() != 0) {
      throw Error(Errc::InvalidFormat, "tree count does not match objective");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidFormat, std::string("malformed GBT model: ") + e.what());
  }
}

}  // namespace sbc
