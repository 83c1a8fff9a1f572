#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"

#include "sbc/cascade.hpp"
#include "sbc/error.hpp"
#include "synthetic.hpp"

using namespace sbc;

namespace {

Errc code_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected sbc::Error");
  return Errc::Io;
}

GbtModel constant_stage(double probability) {
  GbtModel m;
  m.objective = Objective::binary_logistic;
  m.n_features = 2;
  m.base_score = {std::log(probability / (1.0 - probability))};
  return m;
}

// Cascade whose stage i always outputs probabilities[i].
SbcModel constant_cascade(const std::vector<double>& probabilities) {
  std::map<ClassId, std::size_t> freqs;
  for (std::size_t c = 0; c < probabilities.size(); ++c) freqs[static_cast<ClassId>(c)] = 100 - c;
  SbcModel m;
  m.ordering = order_classes(freqs);
  for (double p : probabilities) {
    m.stages.push_back(constant_stage(p));
    m.thresholds.push_back(0.5);
  }
  return m;
}

GbtParams small_params() {
  GbtParams p;
  p.num_rounds = 10;
  p.max_depth = 3;
  return p;
}

Dataset counts_dataset(std::vector<std::size_t> counts, std::uint64_t seed = 3) {
  return testing::make_counts(counts, seed);
}

std::set<std::size_t> members(const StageView& v) { return {v.row_indices.begin(), v.row_indices.end()}; }

}  // namespace

TEST_CASE("order_classes sorts by descending frequency") {
  const ClassOrdering o = order_classes({{0, 5}, {1, 10}, {2, 2}});
  CHECK(o.class_at == std::vector<ClassId>{1, 0, 2});
  CHECK(o.rank(1) == 0);
  CHECK(o.rank(2) == 2);
  const ClassOrdering tie = order_classes({{0, 3}, {1, 3}});
  CHECK(tie.class_at == std::vector<ClassId>{0, 1});
  CHECK(code_of([] { order_classes({{0, 3}}); }) == Errc::TooFewClasses);
  CHECK(code_of([] { order_classes({{0, 3}, {1, 0}}); }) == Errc::TooFewClasses);
}

TEST_CASE("order_classes is a frequency-sorted bijection") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::map<ClassId, std::size_t> freqs;
    const int n = 2 + static_cast<int>(gen() % 9);
    for (int c = 0; c < n; ++c) freqs[c * 3] = 1 + gen() % 6;  // sparse ids, many ties
    const ClassOrdering o = order_classes(freqs);
    REQUIRE(o.size() == freqs.size());
    for (std::size_t i = 0; i < o.size(); ++i) CHECK(o.rank_of.at(o.class_at[i]) == static_cast<int>(i));
    for (std::size_t i = 0; i + 1 < o.size(); ++i) {
      const auto a = freqs.at(o.class_at[i]), b = freqs.at(o.class_at[i + 1]);
      CHECK(a >= b);
      if (a == b) CHECK(o.class_at[i] < o.class_at[i + 1]);
    }
  }
}

TEST_CASE("binarize_stage arithmetic") {
  const Dataset d = counts_dataset({100, 10, 5});
  const ClassOrdering o = order_classes(class_frequencies(d.labels));
  const StageView s0 = binarize_stage(d, o, 0);
  CHECK(s0.positives() == 100);
  CHECK(s0.size() == 115);
  const StageView s1 = binarize_stage(d, o, 1);
  CHECK(s1.positives() == 10);
  CHECK(s1.size() == 15);
  for (std::size_t r : s1.row_indices) CHECK(d.labels[r] != 0);
  CHECK(std::is_sorted(s1.row_indices.begin(), s1.row_indices.end()));
  CHECK(code_of([&] { binarize_stage(d, o, 2); }) == Errc::StageOutOfRange);
  CHECK(code_of([&] { binarize_stage(d, o, -1); }) == Errc::StageOutOfRange);
}

TEST_CASE("last_stage_view sampling") {
  SUBCASE("ratio 1, majority only") {
    const Dataset d = counts_dataset({1000, 50, 10});
    const ClassOrdering o = order_classes(class_frequencies(d.labels));
    const StageView v = last_stage_view(d, o, {});
    CHECK(v.positives() == 10);
    CHECK(v.size() == 20);
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v.binary_labels[i] == 0) CHECK(d.labels[v.row_indices[i]] == o.class_at[0]);
      else CHECK(d.labels[v.row_indices[i]] == o.class_at[2]);
    }
  }
  SUBCASE("ratio 5 clamps to the available source") {
    const Dataset d = counts_dataset({20, 15, 10});
    const ClassOrdering o = order_classes(class_frequencies(d.labels));
    LastStagePolicy p;
    p.negatives_per_positive = 5.0;
    CHECK(last_stage_view(d, o, p).size() == 10 + 20);
    p.source = NegativeSource::all_others;
    CHECK(last_stage_view(d, o, p).size() == 10 + 35);
  }
  SUBCASE("all_others draws from every other class") {
    const Dataset d = counts_dataset({100, 100, 50});
    const ClassOrdering o = order_classes(class_frequencies(d.labels));
    LastStagePolicy p;
    p.source = NegativeSource::all_others;
    p.negatives_per_positive = 3.0;
    const StageView v = last_stage_view(d, o, p);
    std::set<ClassId> neg_classes;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v.binary_labels[i] == 0) neg_classes.insert(d.labels[v.row_indices[i]]);
    }
    CHECK(neg_classes == std::set<ClassId>{o.class_at[0], o.class_at[1]});
    CHECK(v.size() == 50 + 150);
  }
  SUBCASE("deterministic given the seed") {
    const Dataset d = counts_dataset({300, 20, 10});
    const ClassOrdering o = order_classes(class_frequencies(d.labels));
    LastStagePolicy p;
    p.seed = 4;
    const StageView a = last_stage_view(d, o, p);
    CHECK(a.row_indices == last_stage_view(d, o, p).row_indices);
    p.seed = 5;
    CHECK(a.row_indices != last_stage_view(d, o, p).row_indices);
  }
  SUBCASE("empty sources") {
    const Dataset d = counts_dataset({30, 10});
    // ordering that names a class absent from the data
    const ClassOrdering o = order_classes({{0, 30}, {1, 10}, {5, 1}});
    CHECK(code_of([&] { last_stage_view(d, o, {}); }) == Errc::PolicySourceEmpty);
  }
}

TEST_CASE("stage views shrink by each stage's positives") {
  std::mt19937_64 gen(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + gen() % 7;
    std::vector<std::size_t> counts(n);
    for (auto& c : counts) c = 1 + gen() % 50;
    const Dataset d = counts_dataset(counts, gen());
    const ClassOrdering o = order_classes(class_frequencies(d.labels));
    for (int i = 0; i + 2 < static_cast<int>(n); ++i) {
      const StageView a = binarize_stage(d, o, i);
      const StageView b = binarize_stage(d, o, i + 1);
      CHECK(b.size() == a.size() - a.positives());
    }
    for (int i = 0; i + 1 < static_cast<int>(n); ++i) {
      const StageView v = binarize_stage(d, o, i);
      CHECK(v.positives() == counts[static_cast<std::size_t>(o.class_at[static_cast<std::size_t>(i)])]);
      for (std::size_t k = 0; k < v.size(); ++k) CHECK(o.rank(d.labels[v.row_indices[k]]) >= i);
    }
  }
}

TEST_CASE("row order does not change ordering or stage membership") {
  const Dataset d = counts_dataset({40, 40, 25, 7, 7});
  std::vector<std::size_t> perm(d.rows());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::mt19937_64 gen(1);
  std::shuffle(perm.begin(), perm.end(), gen);
  const Dataset shuffled = d.subset(perm);
  const ClassOrdering a = order_classes(class_frequencies(d.labels));
  const ClassOrdering b = order_classes(class_frequencies(shuffled.labels));
  CHECK(a.class_at == b.class_at);
  for (int i = 0; i < 4; ++i) {
    std::set<std::size_t> mapped;
    for (std::size_t r : binarize_stage(shuffled, b, i).row_indices) mapped.insert(perm[r]);
    CHECK(mapped == members(binarize_stage(d, a, i)));
  }
}

TEST_CASE("train_cascade metadata and structure") {
  const Dataset d = counts_dataset({1000, 100, 10, 5});
  const ClassOrdering o = order_classes(class_frequencies(d.labels));
  const GbtParams p = small_params();
  const SbcModel m = train_cascade(d, o, std::span(&p, 1), {});
  REQUIRE(m.num_stages() == 4);
  CHECK(m.metadata[0].train_rows == 1115);
  CHECK(m.metadata[1].train_rows == 115);
  CHECK(m.metadata[2].train_rows == 15);
  CHECK(m.metadata[3].train_rows == 10);
  CHECK(m.metadata[3].positives == 5);
  for (double t : m.thresholds) CHECK(t == 0.5);
  for (const auto& s : m.stages) CHECK(s.objective == Objective::binary_logistic);
}

TEST_CASE("train_cascade accepts per-stage params and annotates failures") {
  const Dataset d = counts_dataset({60, 30, 10});
  const ClassOrdering o = order_classes(class_frequencies(d.labels));
  std::vector<GbtParams> ps(3, small_params());
  ps[2].max_depth = 1;
  const SbcModel m = train_cascade(d, o, ps, {});
  CHECK(m.stages[2].params.max_depth == 1);
  CHECK(m.stages[0].params.max_depth == 3);

  ps[1].learning_rate = -1.0;
  try {
    train_cascade(d, o, ps, {});
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.stage() == 1);
    CHECK(e.code() == Errc::InvalidConfig);
  }
  ps.resize(2);
  CHECK(code_of([&] { train_cascade(d, o, ps, {}); }) == Errc::InvalidConfig);
}

TEST_CASE("two balanced classes: stage 0 is the plain binary model") {
  testing::BlobSpec spec;
  spec.counts = {200, 200};
  spec.separation = 1.5;
  const Dataset d = testing::make_blobs(spec);
  const ClassOrdering o = order_classes(class_frequencies(d.labels));
  GbtParams p = small_params();
  p.subsample = 0.8;
  p.seed = 12;
  const SbcModel m = train_cascade(d, o, std::span(&p, 1), {});
  std::vector<int> y(d.rows());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = d.labels[i] == o.class_at[0] ? 1 : 0;
  const GbtModel plain = train_binary(d.features, y, {}, p);
  CHECK(predict_proba(m.stages[0], d.features) == predict_proba(plain, d.features));
}

TEST_CASE("predict stops at the first accepting stage") {
  const std::vector<double> x{0.0, 0.0};
  const Prediction first = predict(constant_cascade({0.9, 0.9, 0.9}), x);
  REQUIRE(first.known);
  CHECK(*first.known == 0);
  CHECK(first.trace.size() == 1);

  const Prediction none = predict(constant_cascade({0.1, 0.2, 0.3, 0.4}), x);
  CHECK(none.is_unknown());
  CHECK(none.trace.size() == 4);

  const Prediction second = predict(constant_cascade({0.4, 0.8}), x);
  REQUIRE(second.known);
  CHECK(*second.known == 1);
  CHECK(second.trace.size() == 2);
  CHECK(second.trace[1].probability == doctest::Approx(0.8));

  const std::vector<double> wrong{1.0};
  CHECK(code_of([&] { predict(constant_cascade({0.4, 0.8}), wrong); }) == Errc::DimensionMismatch);
}

TEST_CASE("probability equal to the threshold accepts") {
  SbcModel m = constant_cascade({0.3, 0.3});
  m.stages[1].base_score = {0.0};  // exactly 0.5
  const Prediction p = predict(m, std::vector<double>{0.0, 0.0});
  REQUIRE(p.known);
  CHECK(*p.known == 1);
}

TEST_CASE("predict_batch unknown handling") {
  const Matrix X(5, 2, 0.0);
  const SbcModel reject = constant_cascade({0.1, 0.2, 0.3});
  for (const auto& p : predict_batch(reject, X, UnknownAction::emit_unknown)) CHECK(p.is_unknown());
  const auto assigned = predict_batch(reject, X, UnknownAction::assign_last_class);
  for (const auto& p : assigned) {
    REQUIRE(p.known);
    CHECK(*p.known == reject.ordering.class_at[2]);
    CHECK(p.trace.size() == 3);
  }
  CHECK(to_labels(predict_batch(reject, X, UnknownAction::emit_unknown))[0] == kUnknownLabel);

  const SbcModel accept = constant_cascade({0.9, 0.2});
  std::size_t evaluations = 0;
  for (const auto& p : predict_batch(accept, X, UnknownAction::emit_unknown)) evaluations += p.trace.size();
  CHECK(evaluations == X.rows());
  CHECK(code_of([&] { predict_batch(accept, Matrix(2, 3), UnknownAction::emit_unknown); }) ==
        Errc::DimensionMismatch);
}

TEST_CASE("trained cascade: batch equals row-wise predict and brute-force walk") {
  testing::BlobSpec spec;
  spec.counts = {300, 120, 60, 30, 15};
  spec.separation = 2.5;
  const Dataset d = testing::make_blobs(spec);
  const ClassOrdering o = order_classes(class_frequencies(d.labels));
  const GbtParams p = small_params();
  const SbcModel m = train_cascade(d, o, std::span(&p, 1), {});
  const auto batch = predict_batch(m, d.features, UnknownAction::emit_unknown);
  std::size_t unknown = 0, deep = 0;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    const Prediction single = predict(m, d.features.row(r));
    CHECK(single == batch[r]);
    const auto walk = testing::brute_force_walk(m, d.features.row(r));
    CHECK(walk.known_class == (single.known ? *single.known : -1));
    REQUIRE(walk.trace.size() == single.trace.size());
    for (std::size_t k = 0; k < walk.trace.size(); ++k) {
      CHECK(walk.trace[k].first == single.trace[k].stage);
      CHECK(walk.trace[k].second == single.trace[k].probability);
    }
    // routing soundness
    for (std::size_t k = 0; k + 1 < single.trace.size(); ++k) CHECK(single.trace[k].probability < 0.5);
    if (single.known) {
      CHECK(single.trace.back().stage == o.rank(*single.known));
      CHECK(single.trace.back().probability >= 0.5);
    } else {
      CHECK(single.trace.size() == m.num_stages());
      ++unknown;
    }
    deep += single.trace.size() > 1 ? 1 : 0;
  }
  CHECK(deep > 0);
  (void)unknown;
}

TEST_CASE("train_cascade is reproducible") {
  const Dataset d = counts_dataset({200, 50, 20, 8});
  const ClassOrdering o = order_classes(class_frequencies(d.labels));
  GbtParams p = small_params();
  p.subsample = 0.7;
  CascadeOptions opts;
  opts.weights = CascadeWeights::stage_inverse_frequency;
  opts.last_stage.seed = 9;
  const SbcModel a = train_cascade(d, o, std::span(&p, 1), opts);
  const SbcModel b = train_cascade(d, o, std::span(&p, 1), opts);
  nlohmann::json ja = to_json(a), jb = to_json(b);
  for (auto* j : {&ja, &jb}) {
    for (auto& s : (*j)["stages"]) s.erase("train_seconds");
  }
  const bool same = ja == jb;
  CHECK(same);
}

TEST_CASE("stage weights") {
  const Dataset d = counts_dataset({90, 6, 4});
  const ClassOrdering o = order_classes(class_frequencies(d.labels));
  const StageView v = binarize_stage(d, o, 0);
  for (double w : stage_weights(d, v, CascadeWeights::none)) CHECK(w == 1.0);
  const auto sw = stage_weights(d, v, CascadeWeights::stage_inverse_frequency);
  const auto cw = stage_weights(d, v, CascadeWeights::class_inverse_frequency);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const ClassId y = d.labels[v.row_indices[i]];
    if (v.binary_labels[i] == 1) CHECK(sw[i] == doctest::Approx(100.0 / (2 * 90.0)));
    else CHECK(sw[i] == doctest::Approx(100.0 / (2 * 10.0)));
    const double count = y == 0 ? 90.0 : (y == 1 ? 6.0 : 4.0);
    CHECK(cw[i] == doctest::Approx(100.0 / (3 * count)));
  }
}

TEST_CASE("materialized stage data") {
  const Dataset d = counts_dataset({30, 20, 10});
  const ClassOrdering o = order_classes(class_frequencies(d.labels));
  const StageView v = binarize_stage(d, o, 1);
  const Dataset m = materialize(d, v, o);
  CHECK(m.rows() == 30);
  CHECK(m.class_names == std::vector<std::string>{"rest", d.class_names[static_cast<std::size_t>(o.class_at[1])]});
  CHECK(class_frequencies(m.labels).at(1) == 20);
}

TEST_CASE("cascade json round-trip") {
  const Dataset d = counts_dataset({100, 40, 12});
  const ClassOrdering o = order_classes(class_frequencies(d.labels));
  const GbtParams p = small_params();
  CascadeOptions opts;
  opts.last_stage = {NegativeSource::all_others, 2.0, 77};
  opts.weights = CascadeWeights::class_inverse_frequency;
  const SbcModel m = train_cascade(d, o, std::span(&p, 1), opts);
  const SbcModel back = sbc_from_json(nlohmann::json::parse(to_json(m).dump()));
  CHECK(back.ordering.class_at == m.ordering.class_at);
  CHECK(back.thresholds == m.thresholds);
  CHECK(back.last_stage_policy.source == NegativeSource::all_others);
  CHECK(back.last_stage_policy.seed == 77);
  CHECK(back.weights == CascadeWeights::class_inverse_frequency);
  CHECK(back.metadata.size() == 3);
  CHECK(predict_batch(back, d.features, UnknownAction::emit_unknown) ==
        predict_batch(m, d.features, UnknownAction::emit_unknown));
  CHECK(cascade_weights_from_string("per_stage_inverse_frequency") == CascadeWeights::stage_inverse_frequency);
  CHECK(code_of([] { unknown_action_from_string("maybe"); }) == Errc::InvalidConfig);
}
