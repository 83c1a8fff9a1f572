// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Tolerances are pinned below.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sbc/bundle.hpp"
#include "sbc/cascade.hpp"
#include "sbc/commands.hpp"
#include "sbc/config.hpp"
#include "sbc/gbt.hpp"
#include "sbc/hpo.hpp"
#include "sbc/metrics.hpp"
#include "synthetic.hpp"

using namespace sbc;
namespace fs = std::filesystem;

namespace {

constexpr double kGradTol = 1e-6;
constexpr double kHessTol = 1e-4;
constexpr double kGradBudgetS = 5.0;
constexpr double kHgsGap = 0.02;
constexpr double kHgsBudgetS = 120.0;
constexpr double kBenchMinF1 = 0.90;
constexpr double kBenchMaxStd = 0.10;
constexpr double kStdSlack = 0.02;
constexpr double kBenchBudgetS = 180.0;
constexpr double kMajorityTrace = 1.2;
constexpr double kHandTol = 5e-5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool same_bits(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) {
      if (!same_bits(a(r, c), b(r, c))) return false;
    }
  }
  return true;
}

Matrix uniform_rows(std::size_t n, std::size_t dims, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix X(n, dims);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < dims; ++c) X(r, c) = u(gen);
  }
  return X;
}

GbtParams sane_params() {
  GbtParams p;
  p.num_rounds = 50;
  p.learning_rate = 0.3;
  p.max_depth = 4;
  p.seed = 11;
  return p;
}

// 1 ------------------------------------------------------------------------

Outcome gradients() {
  std::mt19937_64 gen(101);
  std::uniform_real_distribution<double> score(-8.0, 8.0);
  std::uniform_real_distribution<double> weight(0.1, 10.0);
  std::bernoulli_distribution coin(0.5);
  const double hg = 1e-5;  // step for the first difference
  const double hh = 1e-3;  // step for the second difference
  double worst_g = 0.0, worst_h = 0.0;

  const double seconds = timed([&] {
    for (int i = 0; i < 1000; ++i) {
      const double s = score(gen), w = weight(gen);
      const int y = coin(gen) ? 1 : 0;
      const GradPair gp = logistic_grad(s, y, w);
      const double fd_g = (logistic_loss(s + hg, y, w) - logistic_loss(s - hg, y, w)) / (2 * hg);
      const double fd_h =
          (logistic_loss(s + hh, y, w) - 2 * logistic_loss(s, y, w) + logistic_loss(s - hh, y, w)) / (hh * hh);
      worst_g = std::max(worst_g, std::abs(gp.grad - fd_g));
      worst_h = std::max(worst_h, std::abs(gp.hess - fd_h));
    }
    for (int k : {3, 5}) {
      std::uniform_int_distribution<int> label(0, k - 1);
      for (int i = 0; i < 1000; ++i) {
        std::vector<double> z(static_cast<std::size_t>(k));
        for (double& v : z) v = score(gen);
        const int y = label(gen);
        const double w = weight(gen);
        const auto gp = softmax_grad(z, y, w);
        for (std::size_t c = 0; c < z.size(); ++c) {
          auto at = [&](double delta) {
            auto zz = z;
            zz[c] += delta;
            return softmax_loss(zz, y, w);
          };
          const double fd_g = (at(hg) - at(-hg)) / (2 * hg);
          const double fd_h = (at(hh) - 2 * at(0.0) + at(-hh)) / (hh * hh);
          worst_g = std::max(worst_g, std::abs(gp[c].grad - fd_g));
          worst_h = std::max(worst_h, std::abs(gp[c].hess - fd_h));
        }
      }
    }
  });
  return {worst_g <= kGradTol && worst_h <= kHessTol && seconds < kGradBudgetS,
          fmt("max |dg|=%.2e (tol %.0e), max |dh|=%.2e (tol %.0e), %.2fs", worst_g, kGradTol, worst_h, kHessTol,
              seconds)};
}

// 2 ------------------------------------------------------------------------

Outcome routing_oracle() {
  testing::BlobSpec spec;
  spec.counts = {400, 200, 100, 60, 40};
  spec.separation = 3.0;
  spec.seed = 21;
  const Dataset d = testing::make_blobs(spec);
  GbtParams p = sane_params();
  p.num_rounds = 20;
  const SbcModel m = train_cascade(d, order_classes(class_frequencies(d)), std::span(&p, 1), {});
  const Matrix X = uniform_rows(200, d.num_features(), -4.0, 10.0, 22);
  const auto batch = predict_batch(m, X, UnknownAction::emit_unknown);

  std::size_t mismatches = 0, unknown = 0, deep = 0;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto walk = testing::brute_force_walk(m, X.row(r));
    const Prediction got = predict(m, X.row(r));
    bool ok = got == batch[r];
    ok = ok && (got.known ? *got.known : -1) == walk.known_class;
    ok = ok && got.trace.size() == walk.trace.size();
    for (std::size_t s = 0; ok && s < walk.trace.size(); ++s) {
      ok = got.trace[s].stage == walk.trace[s].first && same_bits(got.trace[s].probability, walk.trace[s].second);
    }
    mismatches += ok ? 0 : 1;
    unknown += got.is_unknown() ? 1 : 0;
    deep += got.trace.size() >= 3 ? 1 : 0;
  }
  return {mismatches == 0,
          fmt("%zu mismatches over 200 rows (%zu unknown, %zu with trace >= 3)", mismatches, unknown, deep)};
}

// 3 ------------------------------------------------------------------------

Outcome stage_recursion() {
  std::mt19937_64 gen(31);
  std::size_t cases = 0, violations = 0;
  for (int trial = 0; trial < 3000; ++trial) {
    const std::size_t n = 2 + gen() % 7;
    std::vector<std::size_t> counts(n);
    for (auto& c : counts) c = 1 + gen() % 50;
    const Dataset d = testing::make_counts(counts, gen(), 1);

    // frequency ordering, then a random permutation of the same classes
    std::vector<ClassOrdering> orderings = {order_classes(class_frequencies(d))};
    ClassOrdering shuffled;
    shuffled.class_at.resize(n);
    std::iota(shuffled.class_at.begin(), shuffled.class_at.end(), 0);
    std::shuffle(shuffled.class_at.begin(), shuffled.class_at.end(), gen);
    for (std::size_t i = 0; i < n; ++i) shuffled.rank_of[shuffled.class_at[i]] = static_cast<int>(i);
    orderings.push_back(shuffled);

    for (const auto& ord : orderings) {
      ++cases;
      for (std::size_t i = 0; i + 2 < n; ++i) {
        const StageView a = binarize_stage(d, ord, static_cast<int>(i));
        const StageView b = binarize_stage(d, ord, static_cast<int>(i + 1));
        if (b.size() != a.size() - a.positives()) ++violations;
      }
    }
  }
  return {violations == 0, fmt("%zu violations over %zu (counts, ordering) cases", violations, cases)};
}

// 4 ------------------------------------------------------------------------

Outcome degenerate_equivalence() {
  testing::BlobSpec spec;
  spec.counts = {300, 300};
  spec.separation = 1.5;
  spec.seed = 41;
  const Dataset d = testing::make_blobs(spec);
  GbtParams p = sane_params();
  p.subsample = 0.8;
  const ClassOrdering ord = order_classes(class_frequencies(d));
  const SbcModel m = train_cascade(d, ord, std::span(&p, 1), {});

  std::vector<int> y(d.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) y[r] = d.labels[r] == ord.class_at[0] ? 1 : 0;
  const GbtModel alone = train_binary(d.features, y, {}, p);

  const Matrix X = uniform_rows(1000, 2, -4.0, 6.0, 42);
  const Matrix pa = predict_proba(m.stages[0], X);
  const Matrix pb = predict_proba(alone, X);
  const auto routed = predict_batch(m, X, UnknownAction::emit_unknown);
  std::size_t diff = 0;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    if (!same_bits(pa(r, 0), pb(r, 0))) ++diff;
    const bool stage0 = routed[r].trace.size() == 1 && !routed[r].is_unknown();
    if (stage0 != (pb(r, 0) >= 0.5) || !same_bits(routed[r].trace[0].probability, pb(r, 0))) ++diff;
  }
  const bool same_model = to_json(m.stages[0]).at("trees") == to_json(alone).at("trees");
  return {diff == 0 && same_model,
          fmt("%zu differing rows of 1000, tree ensembles %s", diff, same_model ? "identical" : "differ")};
}

// 5 ------------------------------------------------------------------------

Outcome schedule_rule() {
  std::size_t checked = 0, violations = 0;
  for (int factor : {2, 3}) {
    for (std::size_t n0 = 4; n0 <= 20; ++n0) {
      for (std::size_t full : {500u, 2000u, 10000u, 123457u}) {
        for (std::size_t floor : {1u, 12u}) {
          HalvingConfig hc;
          hc.factor = factor;
          HalvingConfig resolved = hc;
          resolved.min_resources = initial_resources(n0, hc, full, floor);
          const auto s = halving_schedule(n0, resolved, full);
          ++checked;
          bool ok = !s.empty() && s[0].candidates == n0 && s[0].resources == resolved.min_resources;
          for (std::size_t t = 1; ok && t < s.size(); ++t) {
            const std::size_t f = static_cast<std::size_t>(factor);
            ok = s[t].candidates == (s[t - 1].candidates + f - 1) / f &&
                 s[t].resources == std::min(s[t - 1].resources * f, full);
          }
          ok = ok && (s.back().candidates == 1 || s.back().resources == full);
          for (std::size_t t = 0; ok && t + 1 < s.size(); ++t) ok = s[t].candidates > 1 && s[t].resources < full;

          // the driver follows the same schedule
          std::map<int, std::pair<std::size_t, std::size_t>> seen;
          const auto trials = successive_halving(
              n0, hc, full, floor, [](std::size_t c, int, std::size_t) { return std::sin(double(c)); });
          for (const auto& tr : trials) {
            auto& e = seen[tr.iteration];
            ++e.first;
            e.second = tr.resources;
          }
          ok = ok && seen.size() == s.size();
          for (std::size_t t = 0; ok && t < s.size(); ++t) {
            ok = seen[int(t)].first == s[t].candidates && seen[int(t)].second == s[t].resources;
          }
          violations += ok ? 0 : 1;
        }
      }
    }
  }
  return {violations == 0, fmt("%zu violations over %zu schedules (auto first budget)", violations, checked)};
}

// 6 ------------------------------------------------------------------------

Outcome hgs_vs_gs() {
  testing::BlobSpec spec;
  spec.counts = {1000, 600, 300, 100};
  spec.separation = 2.5;
  spec.seed = 61;
  const Dataset d = testing::make_blobs(spec);
  GbtParams base;
  base.seed = 62;
  const HpGrid grid = default_grid(base);
  CvConfig cv;
  cv.seed = 63;
  HalvingConfig hc;
  hc.seed = 64;
  const SearchTask task;

  HpoResult gs, hgs;
  double full_cv = 0.0;
  const double seconds = timed([&] {
    gs = grid_search(grid, d, cv, task);
    hgs = halving_grid_search(grid, d, cv, hc, task);
    full_cv = cross_validate(d, hgs.best_params, cv, Objective::multiclass_softmax);
  });
  const double gap = gs.best_score - full_cv;
  return {grid.size() == 12 && d.rows() == 2000 && gap <= kHgsGap && seconds < kHgsBudgetS,
          fmt("GS best %.4f, HGS winner full CV %.4f, gap %.4f (tol %.2f), trials %zu vs %zu, %.1fs", gs.best_score,
              full_cv, gap, kHgsGap, gs.trials.size(), hgs.trials.size(), seconds)};
}

// 7 ------------------------------------------------------------------------

// Class 0 holds two opposite quadrants of unequal mass. An additive model of
// single-feature stumps cannot separate it from the other two quadrants; two
// nested splits can.
Dataset quadrant_data() {
  std::mt19937_64 gen(71);
  std::normal_distribution<double> noise(0.0, 0.5);
  struct Blob {
    double x, y;
    ClassId label;
    std::size_t rows;
  };
  const std::vector<Blob> blobs = {{5, 5, 0, 400}, {-5, -5, 0, 60}, {5, -5, 1, 200}, {-5, 5, 2, 150}};
  Dataset d;
  d.feature_names = {"x0", "x1"};
  d.class_names = {"q0", "q1", "q2"};
  std::vector<double> values;
  for (const Blob& b : blobs) {
    for (std::size_t i = 0; i < b.rows; ++i) {
      values.push_back(b.x + noise(gen));
      values.push_back(b.y + noise(gen));
      d.labels.push_back(b.label);
    }
  }
  d.features = Matrix(d.labels.size(), 2, std::move(values));
  return d;
}

bool subset_of(const HpGrid& child, const HpGrid& parent) {
  const auto pc = parent.candidates();
  for (const auto& c : child.candidates()) {
    if (std::find(pc.begin(), pc.end(), c) == pc.end()) return false;
  }
  return true;
}

bool contains(const HpGrid& g, const GbtParams& p) {
  const auto cs = g.candidates();
  return std::find(cs.begin(), cs.end(), p) != cs.end();
}

Outcome phgs_pruning() {
  // random grids: pruning keeps a subset that holds the parent's best
  std::mt19937_64 gen(72);
  std::size_t random_bad = 0;
  const std::vector<std::pair<std::string, std::vector<double>>> pool = {
      {"max_depth", {1, 2, 3, 4, 5, 6, 7, 8}},
      {"min_child_weight", {0.5, 1, 2, 4, 8}},
      {"num_rounds", {5, 10, 20, 40}},
      {"learning_rate", {0.05, 0.1, 0.3}},
      {"subsample", {0.5, 0.8, 1.0}}};
  for (int trial = 0; trial < 500; ++trial) {
    HpGrid g;
    for (const auto& [name, all] : pool) {
      if (gen() % 2) continue;
      std::vector<double> vals;
      for (double v : all) {
        if (gen() % 3) vals.push_back(v);
      }
      if (vals.empty()) vals.push_back(all.front());
      g.set_axis({name, vals, default_prune_direction(name)});
    }
    const GbtParams best = g.candidate(gen() % g.size());
    const HpGrid pruned = prune_grid(g, best);
    if (!subset_of(pruned, g) || !contains(pruned, best)) ++random_bad;
  }

  // constructed case: stage 0 needs depth 2, so its best depth is interior to {1, 2, 3}
  const Dataset d = quadrant_data();
  GbtParams base;
  base.num_rounds = 10;
  base.seed = 73;
  HpGrid grid(base);
  grid.set_axis({"max_depth", {1, 2, 3}, PruneDirection::upper_bound});
  grid.set_axis({"learning_rate", {0.3, 0.5}, PruneDirection::unpruned});
  CvConfig cv;
  cv.seed = 74;
  HalvingConfig hc;
  hc.seed = 75;
  const ClassOrdering ord = order_classes(class_frequencies(d));
  const TunedCascade hgs = tune_cascade(d, ord, grid, SearchMethod::halving, cv, hc, {});
  const TunedCascade phgs = tune_cascade(d, ord, grid, SearchMethod::pruned_halving, cv, hc, {});

  const double depth0 = phgs.stage_results[0].best_params.max_depth;
  const bool interior = depth0 > 1 && depth0 < 3;
  bool chain_ok = true;
  for (std::size_t s = 1; s < phgs.stage_grids.size(); ++s) {
    chain_ok = chain_ok && subset_of(phgs.stage_grids[s], phgs.stage_grids[s - 1]) &&
               contains(phgs.stage_grids[s], phgs.stage_results[s - 1].best_params);
  }
  std::size_t hgs_trials = 0, phgs_trials = 0;
  for (const auto& r : hgs.stage_results) hgs_trials += r.trials.size();
  for (const auto& r : phgs.stage_results) phgs_trials += r.trials.size();

  return {random_bad == 0 && chain_ok && interior && phgs_trials < hgs_trials,
          fmt("%zu bad random prunes of 500, stage chain %s, stage-0 best depth %.0f (%s), trials pHGS %zu vs HGS "
              "%zu",
              random_bad, chain_ok ? "nested" : "NOT nested", depth0, interior ? "interior" : "NOT interior",
              phgs_trials, hgs_trials)};
}

// 8 and 9 ------------------------------------------------------------------

struct Bench {
  EvalSummary sbc;
  EvalSummary mcc;
  std::vector<Prediction> routed;
  std::vector<ClassId> test_labels;
  std::size_t stages = 0;
};

EvalSummary score(std::span<const int> truth, std::span<const int> pred, std::size_t k) {
  const ConfusionMatrix cm = confusion(truth, pred, k);
  const auto report = per_class_report(cm);
  return summarize(cm, report, {});
}

Bench run_bench(double separation, bool with_mcc) {
  testing::BlobSpec spec;
  spec.counts = {5000, 500, 100, 50, 20};
  spec.separation = separation;
  spec.seed = 81;
  const Dataset train = testing::make_blobs(spec);
  spec.seed = 82;
  const Dataset test = testing::make_blobs(spec);

  const GbtParams p = sane_params();
  const SbcModel m = train_cascade(train, order_classes(class_frequencies(train)), std::span(&p, 1), {});
  Bench b;
  b.stages = m.num_stages();
  b.routed = predict_batch(m, test.features, UnknownAction::assign_last_class);
  b.test_labels = test.labels;
  b.sbc = score(test.labels, to_labels(b.routed), test.num_classes());
  if (with_mcc) {
    const GbtModel mcc = train_multiclass(train.features, train.labels, int(train.num_classes()), {}, p);
    b.mcc = score(test.labels, predict_class(mcc, test.features), test.num_classes());
  }
  return b;
}

std::string f1_list(const EvalSummary& s) {
  std::string out;
  for (const auto& c : s.per_class) out += fmt("%s%.3f", out.empty() ? "" : " ", c.f1);
  return out;
}

Bench separated_bench;

Outcome imbalance_benchmark() {
  Bench overlap;
  const double seconds = timed([&] {
    separated_bench = run_bench(10.0, false);
    overlap = run_bench(2.0, true);
  });
  const EvalSummary& s = separated_bench.sbc;
  const bool ok = s.avg_f1 >= kBenchMinF1 && s.std_f1 <= kBenchMaxStd &&
                  overlap.sbc.std_f1 <= overlap.mcc.std_f1 + kStdSlack && seconds < kBenchBudgetS;
  return {ok, fmt("separated: SBC avg F1 %.4f std %.4f [%s]; overlapping: SBC std %.4f [%s] vs MCC std %.4f [%s]; "
                  "%.1fs",
                  s.avg_f1, s.std_f1, f1_list(s).c_str(), overlap.sbc.std_f1, f1_list(overlap.sbc).c_str(),
                  overlap.mcc.std_f1, f1_list(overlap.mcc).c_str(), seconds)};
}

Outcome inference_cost() {
  const Bench& b = separated_bench;
  if (b.routed.empty()) return {false, "benchmark data unavailable"};
  double sum = 0.0;
  std::size_t majority = 0, longest = 0;
  for (std::size_t r = 0; r < b.routed.size(); ++r) {
    longest = std::max(longest, b.routed[r].trace.size());
    if (b.test_labels[r] == 0) {
      sum += double(b.routed[r].trace.size());
      ++majority;
    }
  }
  const double mean = sum / double(majority);
  return {mean <= kMajorityTrace && longest == b.stages,
          fmt("majority mean trace %.4f (max %.1f), longest trace %zu of %zu stages", mean, kMajorityTrace, longest,
              b.stages)};
}

// 10 -----------------------------------------------------------------------

bool reports_equal(std::span<const int> t, std::span<const int> p, std::size_t k, bool unknown) {
  const auto got = per_class_report(confusion(t, p, k, unknown));
  const auto want = testing::brute_force_report(t, p, k);
  for (std::size_t c = 0; c < k; ++c) {
    if (got[c].support != want[c].support || !same_bits(got[c].precision, want[c].precision) ||
        !same_bits(got[c].recall, want[c].recall) || !same_bits(got[c].f1, want[c].f1)) {
      return false;
    }
  }
  return true;
}

Outcome metrics_oracle() {
  std::size_t cases = 0, bad = 0;

  // Every multiset of (true, predicted) pairs of size <= 8, i.e. every label
  // vector pair up to reordering. Predictions may also be Unknown.
  for (std::size_t k = 1; k <= 4; ++k) {
    for (bool unknown : {false, true}) {
      const std::size_t pred_symbols = k + (unknown ? 1 : 0);
      const std::size_t cells = k * pred_symbols;
      std::vector<std::size_t> mult(cells, 0);
      std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t cell, std::size_t left) {
        if (cell == cells) {
          std::vector<int> t, p;
          for (std::size_t c = 0; c < cells; ++c) {
            for (std::size_t i = 0; i < mult[c]; ++i) {
              t.push_back(int(c / pred_symbols));
              const int pr = int(c % pred_symbols);
              p.push_back(pr == int(k) ? kUnknownLabel : pr);
            }
          }
          ++cases;
          bad += reports_equal(t, p, k, unknown) ? 0 : 1;
          return;
        }
        for (std::size_t m = 0; m <= left; ++m) {
          mult[cell] = m;
          rec(cell + 1, left - m);
        }
        mult[cell] = 0;
      };
      rec(0, 8);
    }
  }

  // Raw ordered vectors wherever the count stays small.
  std::size_t ordered = 0;
  for (std::size_t k = 1; k <= 4; ++k) {
    for (std::size_t len = 0; len <= 8; ++len) {
      const double total = std::pow(double(k), double(2 * len));
      if (total > double(1 << 20)) continue;
      std::vector<int> t(len), p(len);
      for (std::uint64_t code = 0; code < std::uint64_t(total); ++code) {
        std::uint64_t x = code;
        for (std::size_t i = 0; i < len; ++i) {
          t[i] = int(x % k);
          x /= k;
          p[i] = int(x % k);
          x /= k;
        }
        ++ordered;
        bad += reports_equal(t, p, k, false) ? 0 : 1;
      }
    }
  }

  // hand case [[5,0],[2,3]]
  const std::vector<int> t = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const std::vector<int> p = {0, 0, 0, 0, 0, 0, 0, 1, 1, 1};
  const ConfusionMatrix cm = confusion(t, p, 2);
  const auto report = per_class_report(cm);
  const EvalSummary s = summarize(cm, report, {});
  const bool hand = cm.counts == std::vector<std::vector<std::int64_t>>{{5, 0}, {2, 3}} &&
                    std::abs(report[0].f1 - 0.8333) <= kHandTol && std::abs(report[1].f1 - 0.75) <= kHandTol &&
                    std::abs(s.avg_f1 - 0.7917) <= kHandTol;
  return {bad == 0 && hand, fmt("%zu mismatches over %zu pair multisets and %zu ordered vector pairs; hand case F1 "
                                "(%.4f, %.4f) avg %.4f",
                                bad, cases, ordered, report[0].f1, report[1].f1, s.avg_f1)};
}

// 11 -----------------------------------------------------------------------

Outcome persistence() {
  testing::BlobSpec spec;
  spec.counts = {300, 120, 50, 20};
  spec.separation = 2.0;
  spec.dims = 3;
  spec.seed = 111;
  const Dataset d = testing::make_blobs(spec);
  const fs::path dir = fs::temp_directory_path() / "sbc_acceptance_bundle";
  fs::create_directories(dir);
  const Matrix X = uniform_rows(1000, 3, -5.0, 10.0, 112);

  std::string detail;
  bool ok = true;
  for (Method kind : {Method::mcc, Method::sbc}) {
    RunConfig c = config_from_json(nlohmann::json::object());
    c.method = kind;
    c.params = sane_params();
    c.params->subsample = 0.7;
    const ModelBundle before = train_model(c, d).bundle;
    const fs::path file = dir / (to_string(kind) + ".json");
    save_bundle(before, file);
    const ModelBundle after = load_bundle(file);
    bool same;
    if (kind == Method::mcc) {
      same = same_bits(predict_proba(before.mcc(), X), predict_proba(after.mcc(), X));
    } else {
      const auto a = predict_batch(before.sbc(), X, UnknownAction::emit_unknown);
      const auto b = predict_batch(after.sbc(), X, UnknownAction::emit_unknown);
      same = a.size() == b.size();
      for (std::size_t r = 0; same && r < a.size(); ++r) {
        same = a[r].known == b[r].known && a[r].trace.size() == b[r].trace.size();
        for (std::size_t s = 0; same && s < a[r].trace.size(); ++s) {
          same = a[r].trace[s].stage == b[r].trace[s].stage &&
                 same_bits(a[r].trace[s].probability, b[r].trace[s].probability);
        }
      }
    }
    ok = ok && same;
    detail += fmt("%s%s bundle %s", detail.empty() ? "" : ", ", to_string(kind).c_str(),
                  same ? "identical on 1000 rows" : "DIFFERS");
  }
  fs::remove_all(dir);
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"cascade routing oracle", routing_oracle},
      {"stage recursion", stage_recursion},
      {"two-class degenerate equivalence", degenerate_equivalence},
      {"halving schedule", schedule_rule},
      {"HGS vs GS winner quality", hgs_vs_gs},
      {"pHGS pruning", phgs_pruning},
      {"imbalance benchmark", imbalance_benchmark},
      {"inference cost asymmetry", inference_cost},
      {"metrics oracle", metrics_oracle},
      {"bundle persistence", persistence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
