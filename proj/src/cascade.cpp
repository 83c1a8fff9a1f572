#include "sbc/cascade.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "sbc/error.hpp"
#include "sbc/rng.hpp"

namespace sbc {

namespace {

constexpr int kSbcFormatVersion = 1;

std::vector<std::size_t> rows_of_class(const Dataset& d, ClassId c) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    if (d.labels[r] == c) rows.push_back(r);
  }
  return rows;
}

}  // namespace

int ClassOrdering::rank(ClassId c) const {
  auto it = rank_of.find(c);
  if (it == rank_of.end()) throw Error(Errc::LabelOutOfRange, "class " + std::to_string(c) + " is not ordered");
  return it->second;
}

ClassOrdering order_classes(const std::map<ClassId, std::size_t>& freqs) {
  if (freqs.size() < 2) throw Error(Errc::TooFewClasses, "a cascade needs at least 2 classes");
  std::vector<std::pair<ClassId, std::size_t>> items(freqs.begin(), freqs.end());
  for (auto [c, n] : items) {
    if (n == 0) throw Error(Errc::TooFewClasses, "class " + std::to_string(c) + " has no rows");
  }
  // Map iteration is ascending by class id, so a stable sort keeps that as the tie order.
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  ClassOrdering o;
  for (std::size_t i = 0; i < items.size(); ++i) {
    o.class_at.push_back(items[i].first);
    o.rank_of[items[i].first] = static_cast<int>(i);
  }
  return o;
}

std::size_t StageView::positives() const {
  return static_cast<std::size_t>(std::count(binary_labels.begin(), binary_labels.end(), 1));
}

StageView binarize_stage(const Dataset& train, const ClassOrdering& ordering, int stage) {
  const int n = static_cast<int>(ordering.size());
  if (stage < 0 || stage > n - 2) {
    throw Error(Errc::StageOutOfRange, "stage " + std::to_string(stage) + " is not an inner stage of a " +
                                           std::to_string(n) + "-class cascade");
  }
  StageView view;
  view.stage = stage;
  for (std::size_t r = 0; r < train.rows(); ++r) {
    auto it = ordering.rank_of.find(train.labels[r]);
    if (it == ordering.rank_of.end() || it->second < stage) continue;
    view.row_indices.push_back(r);
    view.binary_labels.push_back(it->second == stage ? 1 : 0);
  }
  return view;
}

StageView last_stage_view(const Dataset& train, const ClassOrdering& ordering, const LastStagePolicy& policy) {
  const std::size_t n = ordering.size();
  if (n < 2) throw Error(Errc::TooFewClasses, "a cascade needs at least 2 classes");
  if (!(policy.negatives_per_positive > 0.0)) {
    throw Error(Errc::InvalidConfig, "negatives_per_positive must be positive");
  }
  const ClassId last = ordering.class_at[n - 1];
  std::vector<std::size_t> positives = rows_of_class(train, last);
  if (positives.empty()) throw Error(Errc::PolicySourceEmpty, "last class has no training rows");

  std::vector<std::size_t> source;
  if (policy.source == NegativeSource::majority_only) {
    source = rows_of_class(train, ordering.class_at[0]);
  } else {
    for (std::size_t r = 0; r < train.rows(); ++r) {
      auto it = ordering.rank_of.find(train.labels[r]);
      if (it != ordering.rank_of.end() && it->second < static_cast<int>(n) - 1) source.push_back(r);
    }
  }
  if (source.empty()) throw Error(Errc::PolicySourceEmpty, "no rows available as last-stage negatives");

  const auto wanted = static_cast<std::size_t>(
      std::floor(policy.negatives_per_positive * static_cast<double>(positives.size()) + 0.5));
  Rng rng(policy.seed);
  std::vector<std::size_t> negatives;
  for (std::size_t k : rng.sample_without_replacement(source.size(), std::min(wanted, source.size()))) {
    negatives.push_back(source[k]);
  }

  StageView view;
  view.stage = static_cast<int>(n) - 1;
  std::vector<std::pair<std::size_t, int>> rows;
  for (std::size_t r : positives) rows.emplace_back(r, 1);
  for (std::size_t r : negatives) rows.emplace_back(r, 0);
  std::sort(rows.begin(), rows.end());
  for (auto [r, y] : rows) {
    view.row_indices.push_back(r);
    view.binary_labels.push_back(y);
  }
  return view;
}

StageView stage_view(const Dataset& train, const ClassOrdering& ordering, int stage, const LastStagePolicy& policy) {
  if (stage == static_cast<int>(ordering.size()) - 1) return last_stage_view(train, ordering, policy);
  return binarize_stage(train, ordering, stage);
}

Dataset materialize(const Dataset& train, const StageView& view, const ClassOrdering& ordering) {
  Dataset d;
  d.features = train.features.select_rows(view.row_indices);
  d.labels.assign(view.binary_labels.begin(), view.binary_labels.end());
  const ClassId positive = ordering.class_at[static_cast<std::size_t>(view.stage)];
  d.class_names = {"rest", train.class_names[static_cast<std::size_t>(positive)]};
  d.feature_names = train.feature_names;
  d.label_name = train.label_name;
  return d;
}

std::vector<double> stage_weights(const Dataset& train, const StageView& view, CascadeWeights mode) {
  switch (mode) {
    case CascadeWeights::none:
      return std::vector<double>(view.size(), 1.0);
    case CascadeWeights::stage_inverse_frequency:
      return compute_sample_weights(view.binary_labels, WeightScheme::inverse_frequency);
    case CascadeWeights::class_inverse_frequency: {
      const auto full = compute_sample_weights(train.labels, WeightScheme::inverse_frequency);
      std::vector<double> w;
      w.reserve(view.size());
      for (std::size_t r : view.row_indices) w.push_back(full[r]);
      return w;
    }
  }
  return {};
}

SbcModel train_cascade(const Dataset& train, const ClassOrdering& ordering,
                       std::span<const GbtParams> params_per_stage, const CascadeOptions& options) {
  const std::size_t n = ordering.size();
  if (n < 2) throw Error(Errc::TooFewClasses, "a cascade needs at least 2 classes");
  if (params_per_stage.size() != 1 && params_per_stage.size() != n) {
    throw Error(Errc::InvalidConfig, "expected 1 or " + std::to_string(n) + " stage parameter sets, got " +
                                         std::to_string(params_per_stage.size()));
  }
  if (!(options.default_threshold > 0.0 && options.default_threshold < 1.0)) {
    throw Error(Errc::InvalidConfig, "stage threshold must lie in (0, 1)");
  }

  SbcModel model;
  model.ordering = ordering;
  model.last_stage_policy = options.last_stage;
  model.weights = options.weights;
  for (std::size_t i = 0; i < n; ++i) {
    const int stage = static_cast<int>(i);
    const GbtParams& params = params_per_stage.size() == 1 ? params_per_stage[0] : params_per_stage[i];
    try {
      StageView view = stage_view(train, ordering, stage, options.last_stage);
      const Matrix X = train.features.select_rows(view.row_indices);
      const auto w = stage_weights(train, view, options.weights);
      const auto start = std::chrono::steady_clock::now();
      model.stages.push_back(train_binary(X, view.binary_labels, w, params));
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      model.metadata.push_back({view.size(), view.positives(), elapsed.count()});
    } catch (const Error& e) {
      Error::rethrow_with_stage(e, stage);
    }
    model.thresholds.push_back(options.default_threshold);
  }
  return model;
}

Prediction predict(const SbcModel& model, std::span<const double> x) {
  if (x.size() != model.num_features()) {
    throw Error(Errc::DimensionMismatch, "cascade expects " + std::to_string(model.num_features()) +
                                             " features, got " + std::to_string(x.size()));
  }
  Prediction out;
  for (std::size_t i = 0; i < model.num_stages(); ++i) {
    const double p = predict_positive(model.stages[i], x);
    out.trace.push_back({static_cast<int>(i), p});
    if (p >= model.thresholds[i]) {
      out.known = model.ordering.class_at[i];
      break;
    }
  }
  return out;
}

std::vector<Prediction> predict_batch(const SbcModel& model, const Matrix& X, UnknownAction action) {
  if (X.cols() != model.num_features()) {
    throw Error(Errc::DimensionMismatch, "cascade expects " + std::to_string(model.num_features()) +
                                             " features, got " + std::to_string(X.cols()));
  }
  std::vector<Prediction> out(X.rows());
  std::vector<std::size_t> pending(X.rows());
  std::iota(pending.begin(), pending.end(), std::size_t{0});
  for (std::size_t i = 0; i < model.num_stages() && !pending.empty(); ++i) {
    std::vector<std::size_t> rejected;
    for (std::size_t r : pending) {
      const double p = predict_positive(model.stages[i], X.row(r));
      out[r].trace.push_back({static_cast<int>(i), p});
      if (p >= model.thresholds[i]) out[r].known = model.ordering.class_at[i];
      else rejected.push_back(r);
    }
    pending = std::move(rejected);
  }
  if (action == UnknownAction::assign_last_class) {
    for (std::size_t r : pending) out[r].known = model.ordering.class_at.back();
  }
  return out;
}

std::vector<int> to_labels(std::span<const Prediction> predictions) {
  std::vector<int> labels;
  labels.reserve(predictions.size());
  for (const auto& p : predictions) labels.push_back(p.known ? *p.known : kUnknownLabel);
  return labels;
}

std::string to_string(CascadeWeights w) {
  switch (w) {
    case CascadeWeights::none: return "none";
    case CascadeWeights::stage_inverse_frequency: return "stage_inverse_frequency";
    case CascadeWeights::class_inverse_frequency: return "class_inverse_frequency";
  }
  return "none";
}

CascadeWeights cascade_weights_from_string(const std::string& s) {
  if (s == "none") return CascadeWeights::none;
  if (s == "stage_inverse_frequency" || s == "per_stage_inverse_frequency") return CascadeWeights::stage_inverse_frequency;
  if (s == "class_inverse_frequency") return CascadeWeights::class_inverse_frequency;
  throw Error(Errc::InvalidConfig, "unknown weights mode '" + s + "'");
}

std::string to_string(NegativeSource s) {
  return s == NegativeSource::majority_only ? "majority_only" : "all_others";
}

NegativeSource negative_source_from_string(const std::string& s) {
  if (s == "majority_only") return NegativeSource::majority_only;
  if (s == "all_others") return NegativeSource::all_others;
  throw Error(Errc::InvalidConfig, "unknown last-stage negative source '" + s + "'");
}

std::string to_string(UnknownAction a) {
  return a == UnknownAction::emit_unknown ? "emit_unknown" : "assign_last_class";
}

UnknownAction unknown_action_from_string(const std::string& s) {
  if (s == "emit_unknown") return UnknownAction::emit_unknown;
  if (s == "assign_last_class") return UnknownAction::assign_last_class;
  throw Error(Errc::InvalidConfig, "unknown unknown-action '" + s + "'");
}

nlohmann::json to_json(const SbcModel& model) {
  nlohmann::json stages = nlohmann::json::array();
  for (std::size_t i = 0; i < model.num_stages(); ++i) {
    const auto& meta = model.metadata[i];
    stages.push_back({{"positive_class", model.ordering.class_at[i]},
                      {"threshold", model.thresholds[i]},
                      {"train_rows", meta.train_rows},
                      {"positives", meta.positives},
                      {"train_seconds", meta.train_seconds},
                      {"model", to_json(model.stages[i])}});
  }
  return {{"format", "sbc.cascade"},
          {"version", kSbcFormatVersion},
          {"class_order", model.ordering.class_at},
          {"weights", to_string(model.weights)},
          {"last_stage_policy",
           {{"source", to_string(model.last_stage_policy.source)},
            {"negatives_per_positive", model.last_stage_policy.negatives_per_positive},
            {"seed", model.last_stage_policy.seed}}},
          {"stages", std::move(stages)}};
}

SbcModel sbc_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", "") != "sbc.cascade") throw Error(Errc::InvalidFormat, "not a cascade model document");
    if (j.at("version").get<int>() != kSbcFormatVersion) {
      throw Error(Errc::InvalidFormat, "unsupported cascade model version " + j.at("version").dump());
    }
    SbcModel m;
    const auto order = j.at("class_order").get<std::vector<ClassId>>();
    for (std::size_t i = 0; i < order.size(); ++i) {
      m.ordering.class_at.push_back(order[i]);
      if (!m.ordering.rank_of.emplace(order[i], static_cast<int>(i)).second) {
        throw Error(Errc::InvalidFormat, "class order lists a class twice");
      }
    }
    m.weights = cascade_weights_from_string(j.at("weights").get<std::string>());
    const auto& pol = j.at("last_stage_policy");
    m.last_stage_policy.source = negative_source_from_string(pol.at("source").get<std::string>());
    m.last_stage_policy.negatives_per_positive = pol.at("negatives_per_positive").get<double>();
    m.last_stage_policy.seed = pol.at("seed").get<std::uint64_t>();
    for (const auto& s : j.at("stages")) {
      m.stages.push_back(gbt_from_json(s.at("model")));
      m.thresholds.push_back(s.at("threshold").get<double>());
      m.metadata.push_back({s.at("train_rows").get<std::size_t>(), s.at("positives").get<std::size_t>(),
                            s.at("train_seconds").get<double>()});
    }
    if (m.stages.size() != order.size()) throw Error(Errc::InvalidFormat, "stage count differs from class count");
    for (const auto& st : m.stages) {
      if (st.objective != Objective::binary_logistic || st.n_features != m.stages.front().n_features) {
        throw Error(Errc::InvalidFormat, "cascade stages must be binary models over the same features");
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidFormat, std::string("malformed cascade model: ") + e.what());
  }
}

}  // namespace sbc
