#include "sbc/hpo.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "sbc/error.hpp"
#include "sbc/metrics.hpp"
#include "sbc/rng.hpp"

namespace sbc {

namespace {

const std::vector<std::string>& known_params() {
  static const std::vector<std::string> names = {"l2_lambda", "learning_rate", "max_depth",
                                                 "min_child_weight", "num_rounds", "subsample"};
  return names;
}

bool is_integer_param(const std::string& name) { return name == "max_depth" || name == "num_rounds"; }

double seconds_since(std::chrono::steady_clock::time_point start) {
  const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start;
  return d.count();
}

// Runs fn(i) for i in [0, n). Results are written by index, so the outcome
// does not depend on the thread count. The first exception is rethrown.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::size_t class_count(std::span<const ClassId> labels) { return class_frequencies(labels).size(); }

}  // namespace

// ---------------------------------------------------------------- grids

PruneDirection default_prune_direction(const std::string& name) {
  if (name == "max_depth" || name == "num_rounds") return PruneDirection::upper_bound;
  if (name == "min_child_weight") return PruneDirection::lower_bound;
  return PruneDirection::unpruned;
}

double param_value(const GbtParams& p, const std::string& name) {
  if (name == "num_rounds") return p.num_rounds;
  if (name == "learning_rate") return p.learning_rate;
  if (name == "max_depth") return p.max_depth;
  if (name == "min_child_weight") return p.min_child_weight;
  if (name == "l2_lambda") return p.l2_lambda;
  if (name == "subsample") return p.subsample;
  throw Error(Errc::InvalidConfig, "unknown hyperparameter '" + name + "'");
}

void set_param_value(GbtParams& p, const std::string& name, double value) {
  if (name == "num_rounds") p.num_rounds = static_cast<int>(std::lround(value));
  else if (name == "learning_rate") p.learning_rate = value;
  else if (name == "max_depth") p.max_depth = static_cast<int>(std::lround(value));
  else if (name == "min_child_weight") p.min_child_weight = value;
  else if (name == "l2_lambda") p.l2_lambda = value;
  else if (name == "subsample") p.subsample = value;
  else throw Error(Errc::InvalidConfig, "unknown hyperparameter '" + name + "'");
}

void HpGrid::set_axis(HpAxis axis) {
  const auto& names = known_params();
  if (std::find(names.begin(), names.end(), axis.name) == names.end()) {
    throw Error(Errc::InvalidConfig, "unknown hyperparameter '" + axis.name + "'");
  }
  if (axis.values.empty()) throw Error(Errc::InvalidConfig, "'" + axis.name + "' has no candidate values");
  for (std::size_t i = 0; i < axis.values.size(); ++i) {
    const double v = axis.values[i];
    if (i > 0 && !(v > axis.values[i - 1])) {
      throw Error(Errc::InvalidConfig, "candidates of '" + axis.name + "' must be strictly ascending");
    }
    if (is_integer_param(axis.name) && v != std::round(v)) {
      throw Error(Errc::InvalidConfig, "'" + axis.name + "' takes integer values");
    }
    GbtParams probe = base_;
    set_param_value(probe, axis.name, v);
    probe.validate();
  }
  auto it = std::lower_bound(axes_.begin(), axes_.end(), axis.name,
                             [](const HpAxis& a, const std::string& n) { return a.name < n; });
  if (it != axes_.end() && it->name == axis.name) *it = std::move(axis);
  else axes_.insert(it, std::move(axis));
}

const HpAxis* HpGrid::axis(const std::string& name) const {
  for (const auto& a : axes_) {
    if (a.name == name) return &a;
  }
  return nullptr;
}

std::size_t HpGrid::size() const {
  std::size_t n = 1;
  for (const auto& a : axes_) n *= a.values.size();
  return n;
}

GbtParams HpGrid::candidate(std::size_t index) const {
  GbtParams p = base_;
  // Last axis varies fastest.
  for (std::size_t k = axes_.size(); k-- > 0;) {
    const auto& a = axes_[k];
    set_param_value(p, a.name, a.values[index % a.values.size()]);
    index /= a.values.size();
  }
  return p;
}

std::vector<GbtParams> HpGrid::candidates() const {
  std::vector<GbtParams> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back(candidate(i));
  return out;
}

HpGrid prune_grid(const HpGrid& grid, const GbtParams& best_prev) {
  HpGrid out(grid.base());
  for (const auto& a : grid.axes()) {
    const double best = param_value(best_prev, a.name);
    auto it = std::find(a.values.begin(), a.values.end(), best);
    if (it == a.values.end()) {
      throw Error(Errc::ValueNotInGrid, "best " + a.name + " = " + std::to_string(best) + " is not a candidate");
    }
    HpAxis pruned{a.name, {}, a.prune};
    for (double v : a.values) {
      const bool keep = a.prune == PruneDirection::unpruned ||
                        (a.prune == PruneDirection::upper_bound && v <= best) ||
                        (a.prune == PruneDirection::lower_bound && v >= best);
      if (keep) pruned.values.push_back(v);
    }
    out.set_axis(std::move(pruned));
  }
  return out;
}

std::string to_string(PruneDirection d) {
  switch (d) {
    case PruneDirection::upper_bound: return "upper_bound";
    case PruneDirection::lower_bound: return "lower_bound";
    case PruneDirection::unpruned: return "unpruned";
  }
  return "unpruned";
}

HpGrid grid_from_json(const nlohmann::json& j) {
  try {
    HpGrid grid(j.contains("base") ? gbt_params_from_json(j.at("base")) : GbtParams{});
    // Either {"base": ..., "params": {...}} or a bare name -> axis mapping.
    const bool nested = j.contains("params") || j.contains("base");
    if (nested && !j.contains("params")) return grid;
    for (const auto& [name, spec] : (nested ? j.at("params") : j).items()) {
      HpAxis axis{name, {}, default_prune_direction(name)};
      if (spec.is_array()) {
        axis.values = spec.get<std::vector<double>>();
      } else {
        axis.values = spec.at("values").get<std::vector<double>>();
        if (spec.contains("prune")) {
          const auto d = spec.at("prune").get<std::string>();
          if (d == "upper_bound") axis.prune = PruneDirection::upper_bound;
          else if (d == "lower_bound") axis.prune = PruneDirection::lower_bound;
          else if (d == "unpruned") axis.prune = PruneDirection::unpruned;
          else throw Error(Errc::InvalidConfig, "unknown prune direction '" + d + "'");
        }
      }
      grid.set_axis(std::move(axis));
    }
    return grid;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("malformed grid: ") + e.what());
  }
}

nlohmann::json to_json(const HpGrid& grid) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& a : grid.axes()) params[a.name] = {{"values", a.values}, {"prune", to_string(a.prune)}};
  return {{"base", to_json(grid.base())}, {"params", std::move(params)}};
}

// ---------------------------------------------------------------- cross-validation

std::vector<int> assign_folds(std::span<const ClassId> labels, const CvConfig& cv) {
  if (cv.folds < 2) throw Error(Errc::InvalidConfig, "cross-validation needs at least 2 folds");
  Rng rng(cv.seed);
  std::vector<int> fold(labels.size(), 0);
  if (cv.stratified) {
    std::map<ClassId, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    std::size_t offset = 0;
    for (auto& [c, rows] : by_class) {
      rng.shuffle(rows);
      for (std::size_t k = 0; k < rows.size(); ++k) {
        fold[rows[k]] = static_cast<int>((offset + k) % static_cast<std::size_t>(cv.folds));
      }
      offset += rows.size();
    }
  } else {
    std::vector<std::size_t> rows(labels.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    rng.shuffle(rows);
    for (std::size_t k = 0; k < rows.size(); ++k) fold[rows[k]] = static_cast<int>(k % static_cast<std::size_t>(cv.folds));
  }
  return fold;
}

double score_predictions(std::span<const int> y_true, std::span<const int> y_pred, std::size_t n_classes,
                         CvMetric metric) {
  const ConfusionMatrix cm = confusion(y_true, y_pred, n_classes);
  if (metric == CvMetric::accuracy) {
    return cm.total() > 0 ? static_cast<double>(cm.trace()) / static_cast<double>(cm.total()) : 0.0;
  }
  // Macro-F1 over the classes that occur in y_true.
  const auto report = per_class_report(cm);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < report.size(); ++c) {
    if (report[c].support == 0) continue;
    sum += report[c].f1;
    ++n;
  }
  return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

double cross_validate(const Dataset& data, const GbtParams& params, const CvConfig& cv, Objective objective,
                      WeightScheme scheme, std::span<const double> fixed_weights) {
  if (data.rows() == 0) throw Error(Errc::EmptyData, "no rows to cross-validate");
  if (!fixed_weights.empty() && fixed_weights.size() != data.rows()) {
    throw Error(Errc::DimensionMismatch, "fixed weights do not match the row count");
  }
  const auto folds = assign_folds(data.labels, cv);
  const auto all_classes = class_frequencies(data.labels);
  const std::size_t n_classes = objective == Objective::binary_logistic ? 2 : data.num_classes();

  double total = 0.0;
  for (int f = 0; f < cv.folds; ++f) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < data.rows(); ++i) (folds[i] == f ? test_rows : train_rows).push_back(i);
    Dataset train = data.subset(train_rows);
    Dataset test = data.subset(test_rows);
    if (class_frequencies(test.labels).size() != all_classes.size() || class_count(train.labels) < 2) {
      throw Error(Errc::FoldDegenerate, "fold " + std::to_string(f) + " does not contain every class");
    }
    std::vector<double> w;
    if (!fixed_weights.empty()) {
      for (std::size_t i : train_rows) w.push_back(fixed_weights[i]);
    } else {
      w = compute_sample_weights(train.labels, scheme);
    }
    std::vector<int> pred;
    if (objective == Objective::binary_logistic) {
      pred = predict_class(train_binary(train.features, train.labels, w, params), test.features, 0.5);
    } else {
      pred = predict_class(
          train_multiclass(train.features, train.labels, static_cast<int>(data.num_classes()), w, params),
          test.features);
    }
    total += score_predictions(test.labels, pred, n_classes, cv.metric);
  }
  return total / static_cast<double>(cv.folds);
}

// ---------------------------------------------------------------- searches

HpoResult grid_search(const HpGrid& grid, const Dataset& data, const CvConfig& cv, const SearchTask& task) {
  const auto start = std::chrono::steady_clock::now();
  const auto candidates = grid.candidates();
  if (candidates.empty()) throw Error(Errc::InvalidConfig, "empty hyperparameter grid");
  HpoResult result;
  result.trials.resize(candidates.size());
  parallel_for(candidates.size(), cv.threads, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const double score = cross_validate(data, candidates[i], cv, task.objective, task.scheme, task.fixed_weights);
    result.trials[i] = {i, candidates[i], 0, data.rows(), score, seconds_since(t0)};
  });
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    if (i == 0 || result.trials[i].score > result.best_score) {
      result.best_score = result.trials[i].score;
      result.best_candidate = i;
    }
  }
  result.best_params = candidates[result.best_candidate];
  result.wall_clock = seconds_since(start);
  return result;
}

std::size_t initial_resources(std::size_t n_candidates, const HalvingConfig& hc, std::size_t full_resources,
                              std::size_t floor_resources) {
  if (hc.factor < 2) throw Error(Errc::InvalidConfig, "halving factor must be at least 2");
  const auto f = static_cast<std::size_t>(hc.factor);
  if (hc.min_resources != 0) {
    if (hc.min_resources < floor_resources) {
      throw Error(Errc::InvalidConfig, "min_resources " + std::to_string(hc.min_resources) +
                                           " is below folds x classes = " + std::to_string(floor_resources));
    }
    return std::min(hc.min_resources, full_resources);
  }
  // Budget that reaches the full data at the step where one candidate remains.
  double scale = 1.0;
  for (std::size_t n = n_candidates; n > 1; n = (n + f - 1) / f) scale *= static_cast<double>(f);
  const auto r = static_cast<std::size_t>(std::ceil(static_cast<double>(full_resources) / scale));
  return std::min(std::max(r, floor_resources), full_resources);
}

std::vector<HalvingIteration> halving_schedule(std::size_t n_candidates, const HalvingConfig& hc,
                                               std::size_t full_resources) {
  std::vector<HalvingIteration> out;
  if (n_candidates == 0) return out;
  if (hc.factor < 2) throw Error(Errc::InvalidConfig, "halving factor must be at least 2");
  const auto f = static_cast<std::size_t>(hc.factor);
  std::size_t n = n_candidates;
  std::size_t r = std::min(std::max<std::size_t>(hc.min_resources, 1), full_resources);
  while (true) {
    if (n == 1) r = full_resources;
    out.push_back({n, r});
    if (n == 1 || r == full_resources) break;
    n = (n + f - 1) / f;
    r = std::min(r * f, full_resources);
  }
  return out;
}

std::vector<Trial> successive_halving(std::size_t n_candidates, const HalvingConfig& hc, std::size_t full_resources,
                                      std::size_t floor_resources, const HalvingEvaluator& evaluate, int threads) {
  HalvingConfig resolved = hc;
  resolved.min_resources = initial_resources(n_candidates, hc, full_resources, floor_resources);
  const auto schedule = halving_schedule(n_candidates, resolved, full_resources);

  std::vector<std::size_t> survivors(n_candidates);
  std::iota(survivors.begin(), survivors.end(), std::size_t{0});
  std::vector<Trial> trials;
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    const auto& it = schedule[t];
    survivors.resize(it.candidates);
    std::vector<Trial> round(survivors.size());
    parallel_for(survivors.size(), threads, [&](std::size_t k) {
      const auto t0 = std::chrono::steady_clock::now();
      const double score = evaluate(survivors[k], static_cast<int>(t), it.resources);
      round[k] = {survivors[k], {}, static_cast<int>(t), it.resources, score, seconds_since(t0)};
    });
    // Survivors for the next iteration: best scores first, enumeration order on ties.
    std::vector<std::size_t> order(round.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (round[a].score != round[b].score) return round[a].score > round[b].score;
      return round[a].candidate < round[b].candidate;
    });
    std::vector<std::size_t> ranked;
    for (std::size_t k : order) ranked.push_back(round[k].candidate);
    survivors = std::move(ranked);
    trials.insert(trials.end(), round.begin(), round.end());
  }
  return trials;
}

std::vector<std::size_t> stratified_subsample(std::span<const ClassId> labels, std::size_t size,
                                              std::size_t per_class_floor, std::uint64_t seed) {
  if (size >= labels.size()) {
    std::vector<std::size_t> all(labels.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return all;
  }
  std::map<ClassId, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  Rng rng(seed);
  const double fraction = static_cast<double>(size) / static_cast<double>(labels.size());
  std::vector<std::size_t> out;
  for (auto& [c, rows] : by_class) {
    auto quota = static_cast<std::size_t>(std::floor(static_cast<double>(rows.size()) * fraction + 0.5));
    quota = std::clamp(quota, std::min(per_class_floor, rows.size()), rows.size());
    for (std::size_t k : rng.sample_without_replacement(rows.size(), quota)) out.push_back(rows[k]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

HpoResult halving_grid_search(const HpGrid& grid, const Dataset& data, const CvConfig& cv, const HalvingConfig& hc,
                              const SearchTask& task) {
  const auto start = std::chrono::steady_clock::now();
  const auto candidates = grid.candidates();
  if (candidates.empty()) throw Error(Errc::InvalidConfig, "empty hyperparameter grid");
  const std::size_t k_classes = class_count(data.labels);
  const std::size_t floor = static_cast<std::size_t>(cv.folds) * k_classes;

  // One subsample per iteration, shared by every candidate of that iteration.
  std::map<int, std::vector<std::size_t>> subsamples;
  std::mutex subsample_mutex;
  auto rows_for = [&](int iteration, std::size_t resources) {
    std::lock_guard lock(subsample_mutex);
    auto it = subsamples.find(iteration);
    if (it == subsamples.end()) {
      it = subsamples
               .emplace(iteration, stratified_subsample(data.labels, resources, static_cast<std::size_t>(cv.folds),
                                                        Rng::mix(hc.seed + static_cast<std::uint64_t>(iteration))))
               .first;
    }
    return it->second;
  };

  auto evaluate = [&](std::size_t candidate, int iteration, std::size_t resources) {
    const auto rows = rows_for(iteration, resources);
    if (rows.size() == data.rows()) {
      return cross_validate(data, candidates[candidate], cv, task.objective, task.scheme, task.fixed_weights);
    }
    Dataset sub = data.subset(rows);
    std::vector<double> w;
    if (!task.fixed_weights.empty()) {
      for (std::size_t r : rows) w.push_back(task.fixed_weights[r]);
    }
    return cross_validate(sub, candidates[candidate], cv, task.objective, task.scheme, w);
  };

  HpoResult result;
  result.trials = successive_halving(candidates.size(), hc, data.rows(), floor, evaluate, cv.threads);
  for (auto& t : result.trials) t.params = candidates[t.candidate];
  const int last = result.trials.back().iteration;
  bool first = true;
  for (const auto& t : result.trials) {
    if (t.iteration != last) continue;
    if (first || t.score > result.best_score ||
        (t.score == result.best_score && t.candidate < result.best_candidate)) {
      result.best_score = t.score;
      result.best_candidate = t.candidate;
      first = false;
    }
  }
  result.best_params = candidates[result.best_candidate];
  result.wall_clock = seconds_since(start);
  return result;
}

// ---------------------------------------------------------------- cascades

TunedCascade tune_cascade(const Dataset& train, const ClassOrdering& ordering, const HpGrid& grid,
                          SearchMethod method, const CvConfig& cv, const HalvingConfig& hc,
                          const CascadeOptions& options) {
  TunedCascade out;
  const auto hpo_start = std::chrono::steady_clock::now();
  std::vector<GbtParams> best;
  HpGrid stage_grid = grid;
  for (std::size_t i = 0; i < ordering.size(); ++i) {
    const int stage = static_cast<int>(i);
    try {
      if (method == SearchMethod::pruned_halving && i > 0) stage_grid = prune_grid(stage_grid, best.back());
      const StageView view = stage_view(train, ordering, stage, options.last_stage);
      const Dataset data = materialize(train, view, ordering);
      SearchTask task;
      task.objective = Objective::binary_logistic;
      if (options.weights == CascadeWeights::stage_inverse_frequency) task.scheme = WeightScheme::inverse_frequency;
      if (options.weights == CascadeWeights::class_inverse_frequency) {
        task.fixed_weights = stage_weights(train, view, options.weights);
      }
      HpoResult r = method == SearchMethod::grid ? grid_search(stage_grid, data, cv, task)
                                                 : halving_grid_search(stage_grid, data, cv, hc, task);
      best.push_back(r.best_params);
      out.stage_results.push_back(std::move(r));
      out.stage_grids.push_back(stage_grid);
    } catch (const Error& e) {
      Error::rethrow_with_stage(e, stage);
    }
  }
  out.hpo_seconds = seconds_since(hpo_start);
  const auto train_start = std::chrono::steady_clock::now();
  out.model = train_cascade(train, ordering, best, options);
  out.train_seconds = seconds_since(train_start);
  return out;
}

nlohmann::json to_json(const HpoResult& result) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : result.trials) {
    trials.push_back({{"candidate", t.candidate},
                      {"params", to_json(t.params)},
                      {"iteration", t.iteration},
                      {"resources", t.resources},
                      {"score", t.score},
                      {"seconds", t.seconds}});
  }
  return {{"best_params", to_json(result.best_params)},
          {"best_candidate", result.best_candidate},
          {"best_score", result.best_score},
          {"wall_clock", result.wall_clock},
          {"trials", std::move(trials)}};
}

std::string to_string(SearchMethod m) {
  switch (m) {
    case SearchMethod::grid: return "gs";
    case SearchMethod::halving: return "hgs";
    case SearchMethod::pruned_halving: return "phgs";
  }
  return "gs";
}

}  // namespace sbc
