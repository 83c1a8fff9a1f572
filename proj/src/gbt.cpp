#include "sbc/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sbc/error.hpp"
#include "sbc/rng.hpp"

namespace sbc {

namespace {

// Minimum loss reduction for a split to be kept.
constexpr double kMinSplitGain = 1e-6;

struct NodeStats {
  double grad = 0.0;
  double hess = 0.0;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool default_left = false;
  bool valid() const { return feature >= 0; }
};

// Column-wise presorted row order shared by every tree of one training run.
struct SortedColumns {
  std::vector<std::vector<std::uint32_t>> present;  // rows with a value, ascending
  std::vector<std::vector<std::uint32_t>> missing;  // rows with NaN

  explicit SortedColumns(const Matrix& X) : present(X.cols()), missing(X.cols()) {
    for (std::size_t f = 0; f < X.cols(); ++f) {
      auto& rows = present[f];
      for (std::uint32_t r = 0; r < X.rows(); ++r) {
        if (std::isnan(X(r, f))) missing[f].push_back(r);
        else rows.push_back(r);
      }
      std::stable_sort(rows.begin(), rows.end(),
                       [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
    }
  }
};

double split_score(double g, double h, double lambda) {
  double denom = h + lambda;
  return denom > 0.0 ? g * g / denom : 0.0;
}

// Grows one tree level by level with exact greedy split search.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const SortedColumns& cols, std::span<const GradPair> gh,
              const GbtParams& params)
      : X_(X), cols_(cols), gh_(gh), params_(params) {}

  // `in_sample[r]` marks rows that take part in this tree.
  Tree build(const std::vector<char>& in_sample) {
    Tree tree;
    grad_.clear();
    row_node_.assign(X_.rows(), -1);
    NodeStats root;
    for (std::size_t r = 0; r < X_.rows(); ++r) {
      if (!in_sample[r]) continue;
      row_node_[r] = 0;
      root.grad += gh_[r].grad;
      root.hess += gh_[r].hess;
    }
    add_node(tree, root, 0);

    std::vector<int> frontier = {0};
    for (int depth = 0; depth < params_.max_depth && !frontier.empty(); ++depth) {
      auto splits = find_splits(tree, frontier);
      std::vector<int> next;
      for (std::size_t k = 0; k < frontier.size(); ++k) {
        const int node = frontier[k];
        const SplitCandidate& s = splits[k];
        if (!s.valid()) continue;
        tree.feature[node] = s.feature;
        tree.threshold[node] = s.threshold;
        tree.default_left[node] = s.default_left ? 1 : 0;
        int l = add_node(tree, {}, depth + 1);
        int r = add_node(tree, {}, depth + 1);
        tree.left[node] = l;
        tree.right[node] = r;
        next.push_back(l);
        next.push_back(r);
      }
      if (next.empty()) break;

      // Route rows of split nodes to their children; sums in row order.
      std::vector<NodeStats> stats(tree.size());
      for (std::size_t r = 0; r < X_.rows(); ++r) {
        int node = row_node_[r];
        if (node < 0 || tree.is_leaf(static_cast<std::size_t>(node))) continue;
        const double v = X_(r, static_cast<std::size_t>(tree.feature[node]));
        const bool go_left = std::isnan(v) ? tree.default_left[node] != 0 : v < tree.threshold[node];
        int child = go_left ? tree.left[node] : tree.right[node];
        row_node_[r] = child;
        stats[child].grad += gh_[r].grad;
        stats[child].hess += gh_[r].hess;
      }
      for (int child : next) {
        grad_[child] = stats[child].grad;
        tree.hessian_sum[child] = stats[child].hess;
      }
      frontier = std::move(next);
    }

    for (std::size_t n = 0; n < tree.size(); ++n) {
      if (tree.is_leaf(n)) {
        tree.value[n] = params_.learning_rate * leaf_weight(grad_[n], tree.hessian_sum[n], params_.l2_lambda);
      }
    }
    return tree;
  }

 private:
  int add_node(Tree& tree, NodeStats s, int depth) {
    tree.left.push_back(-1);
    tree.right.push_back(-1);
    tree.feature.push_back(-1);
    tree.threshold.push_back(0.0);
    tree.default_left.push_back(0);
    tree.value.push_back(0.0);
    tree.hessian_sum.push_back(s.hess);
    tree.depth.push_back(depth);
    grad_.push_back(s.grad);
    return static_cast<int>(tree.size() - 1);
  }

  std::vector<SplitCandidate> find_splits(const Tree& tree, const std::vector<int>& frontier) {
    const std::size_t n_nodes = tree.size();
    std::vector<int> slot(n_nodes, -1);
    for (std::size_t k = 0; k < frontier.size(); ++k) slot[static_cast<std::size_t>(frontier[k])] = static_cast<int>(k);

    const double lambda = params_.l2_lambda;
    const double mcw = params_.min_child_weight;
    std::vector<SplitCandidate> best(frontier.size());
    std::vector<double> parent_score(frontier.size());
    for (std::size_t k = 0; k < frontier.size(); ++k) {
      auto n = static_cast<std::size_t>(frontier[k]);
      parent_score[k] = split_score(grad_[n], tree.hessian_sum[n], lambda);
    }

    std::vector<NodeStats> left(frontier.size()), miss(frontier.size());
    std::vector<double> last(frontier.size());
    std::vector<char> seen(frontier.size());

    for (std::size_t f = 0; f < X_.cols(); ++f) {
      std::fill(left.begin(), left.end(), NodeStats{});
      std::fill(miss.begin(), miss.end(), NodeStats{});
      std::fill(seen.begin(), seen.end(), 0);
      for (std::uint32_t r : cols_.missing[f]) {
        int node = row_node_[r];
        if (node < 0 || slot[static_cast<std::size_t>(node)] < 0) continue;
        auto k = static_cast<std::size_t>(slot[static_cast<std::size_t>(node)]);
        miss[k].grad += gh_[r].grad;
        miss[k].hess += gh_[r].hess;
      }

      auto evaluate = [&](std::size_t k, double threshold) {
        auto n = static_cast<std::size_t>(frontier[k]);
        const double G = grad_[n], H = tree.hessian_sum[n];
        const bool has_missing = miss[k].hess > 0.0 || miss[k].grad != 0.0;
        for (int dir = 0; dir < (has_missing ? 2 : 1); ++dir) {
          double gl = left[k].grad, hl = left[k].hess;
          if (dir == 1) {
            gl += miss[k].grad;
            hl += miss[k].hess;
          }
          const double gr = G - gl, hr = H - hl;
          if (hl < mcw || hr < mcw) continue;
          const double gain = 0.5 * (split_score(gl, hl, lambda) + split_score(gr, hr, lambda) - parent_score[k]);
          if (gain > kMinSplitGain && gain > best[k].gain) {
            best[k] = {gain, static_cast<int>(f), threshold, dir == 1};
          }
        }
      };

      for (std::uint32_t r : cols_.present[f]) {
        int node = row_node_[r];
        if (node < 0) continue;
        int s = slot[static_cast<std::size_t>(node)];
        if (s < 0) continue;
        auto k = static_cast<std::size_t>(s);
        const double v = X_(r, f);
        if (seen[k] && v > last[k]) {
          double threshold = last[k] + (v - last[k]) / 2.0;
          if (!(threshold > last[k])) threshold = v;
          evaluate(k, threshold);
        }
        left[k].grad += gh_[r].grad;
        left[k].hess += gh_[r].hess;
        last[k] = v;
        seen[k] = 1;
      }
    }
    return best;
  }

  const Matrix& X_;
  const SortedColumns& cols_;
  std::span<const GradPair> gh_;
  const GbtParams& params_;
  std::vector<int> row_node_;
  std::vector<double> grad_;
};

std::vector<char> draw_sample(std::size_t n, const GbtParams& params, int round) {
  std::vector<char> in_sample(n, 1);
  if (params.subsample >= 1.0) return in_sample;
  auto count = static_cast<std::size_t>(std::floor(params.subsample * static_cast<double>(n) + 0.5));
  count = std::clamp<std::size_t>(count, 1, n);
  Rng rng(params.seed, static_cast<std::uint64_t>(round));
  std::fill(in_sample.begin(), in_sample.end(), 0);
  for (std::size_t r : rng.sample_without_replacement(n, count)) in_sample[r] = 1;
  return in_sample;
}

void check_inputs(const Matrix& X, std::size_t n_labels, std::span<const double> weights) {
  if (X.rows() == 0 || n_labels == 0) throw Error(Errc::EmptyData, "no training rows");
  if (X.rows() != n_labels) {
    throw Error(Errc::DimensionMismatch, "feature rows (" + std::to_string(X.rows()) +
                                             ") differ from labels (" + std::to_string(n_labels) + ")");
  }
  if (!weights.empty() && weights.size() != n_labels) {
    throw Error(Errc::DimensionMismatch, "weight count differs from label count");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error(Errc::InvalidConfig, "sample weights must be positive and finite");
  }
}

double weight_at(std::span<const double> weights, std::size_t i) {
  return weights.empty() ? 1.0 : weights[i];
}

void check_columns(const GbtModel& model, const Matrix& X) {
  if (X.cols() != model.n_features) {
    throw Error(Errc::DimensionMismatch, "model expects " + std::to_string(model.n_features) +
                                             " features, got " + std::to_string(X.cols()));
  }
}

}  // namespace

void GbtParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidConfig, "GbtParams: " + what); };
  if (num_rounds < 0) fail("num_rounds must be non-negative");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) fail("learning_rate must lie in (0, 1]");
  if (max_depth < 1) fail("max_depth must be positive");
  if (!(min_child_weight >= 0.0)) fail("min_child_weight must be non-negative");
  if (!(l2_lambda >= 0.0)) fail("l2_lambda must be non-negative");
  if (!(subsample > 0.0 && subsample <= 1.0)) fail("subsample must lie in (0, 1]");
}

std::size_t Tree::leaf_index(std::span<const double> x) const {
  std::size_t node = 0;
  while (!is_leaf(node)) {
    const double v = x[static_cast<std::size_t>(feature[node])];
    const bool go_left = std::isnan(v) ? default_left[node] != 0 : v < threshold[node];
    node = static_cast<std::size_t>(go_left ? left[node] : right[node]);
  }
  return node;
}

int Tree::max_depth() const {
  int d = 0;
  for (std::size_t n = 0; n < size(); ++n) {
    if (is_leaf(n)) d = std::max(d, depth[n]);
  }
  return d;
}

double sigmoid(double score) {
  if (score >= 0.0) return 1.0 / (1.0 + std::exp(-score));
  const double e = std::exp(score);
  return e / (1.0 + e);
}

double logistic_loss(double score, int label, double weight) {
  // log(1 + exp(s)) - y s, written to avoid overflow
  const double softplus = score > 0.0 ? score + std::log1p(std::exp(-score)) : std::log1p(std::exp(score));
  return weight * (softplus - (label == 1 ? score : 0.0));
}

GradPair logistic_grad(double score, int label, double weight) {
  const double p = sigmoid(score);
  return {weight * (p - static_cast<double>(label)), weight * p * (1.0 - p)};
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

double softmax_loss(std::span<const double> scores, int label, double weight) {
  const double m = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - m);
  return weight * (m + std::log(sum) - scores[static_cast<std::size_t>(label)]);
}

std::vector<GradPair> softmax_grad(std::span<const double> scores, int label, double weight) {
  auto p = softmax(scores);
  std::vector<GradPair> out(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double target = static_cast<int>(k) == label ? 1.0 : 0.0;
    out[k] = {weight * (p[k] - target), weight * p[k] * (1.0 - p[k])};
  }
  return out;
}

double leaf_weight(double grad_sum, double hess_sum, double l2_lambda) {
  const double denom = hess_sum + l2_lambda;
  return denom > 0.0 ? -grad_sum / denom : 0.0;
}

GbtModel train_binary(const Matrix& X, std::span<const int> y, std::span<const double> weights,
                      const GbtParams& params) {
  params.validate();
  check_inputs(X, y.size(), weights);
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw Error(Errc::LabelOutOfRange, "binary labels must be 0 or 1");
    (y[i] == 1 ? pos : neg) += weight_at(weights, i);
  }
  if (pos == 0.0 || neg == 0.0) throw Error(Errc::SingleClassInput, "binary training needs both classes");

  GbtModel model;
  model.objective = Objective::binary_logistic;
  model.n_classes = 2;
  model.n_features = X.cols();
  model.params = params;
  model.base_score = {std::log(pos / neg)};

  const SortedColumns cols(X);
  std::vector<double> score(X.rows(), model.base_score[0]);
  std::vector<GradPair> gh(X.rows());
  for (int round = 0; round < params.num_rounds; ++round) {
    for (std::size_t i = 0; i < X.rows(); ++i) gh[i] = logistic_grad(score[i], y[i], weight_at(weights, i));
    TreeBuilder builder(X, cols, gh, params);
    Tree tree = builder.build(draw_sample(X.rows(), params, round));
    for (std::size_t i = 0; i < X.rows(); ++i) score[i] += tree.predict(X.row(i));
    model.trees.push_back(std::move(tree));
  }
  return model;
}

GbtModel train_multiclass(const Matrix& X, std::span<const ClassId> y, int n_classes,
                          std::span<const double> weights, const GbtParams& params) {
  params.validate();
  check_inputs(X, y.size(), weights);
  if (n_classes < 2) throw Error(Errc::SingleClassInput, "multiclass training needs at least 2 classes");
  std::vector<char> present(static_cast<std::size_t>(n_classes), 0);
  for (ClassId c : y) {
    if (c < 0 || c >= n_classes) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(c) + " out of range");
    present[static_cast<std::size_t>(c)] = 1;
  }
  if (std::count(present.begin(), present.end(), 1) < 2) {
    throw Error(Errc::SingleClassInput, "multiclass training needs at least 2 classes present");
  }

  const auto K = static_cast<std::size_t>(n_classes);
  GbtModel model;
  model.objective = Objective::multiclass_softmax;
  model.n_classes = n_classes;
  model.n_features = X.cols();
  model.params = params;
  model.base_score.assign(K, 0.0);

  const SortedColumns cols(X);
  Matrix score(X.rows(), K, 0.0);
  std::vector<std::vector<GradPair>> gh(K, std::vector<GradPair>(X.rows()));
  for (int round = 0; round < params.num_rounds; ++round) {
    for (std::size_t i = 0; i < X.rows(); ++i) {
      auto g = softmax_grad(score.row(i), y[i], weight_at(weights, i));
      for (std::size_t k = 0; k < K; ++k) gh[k][i] = g[k];
    }
    const auto sample = draw_sample(X.rows(), params, round);
    std::vector<Tree> round_trees;
    for (std::size_t k = 0; k < K; ++k) {
      TreeBuilder builder(X, cols, gh[k], params);
      round_trees.push_back(builder.build(sample));
    }
    for (std::size_t i = 0; i < X.rows(); ++i) {
      for (std::size_t k = 0; k < K; ++k) score(i, k) += round_trees[k].predict(X.row(i));
    }
    for (auto& t : round_trees) model.trees.push_back(std::move(t));
  }
  return model;
}

Matrix predict_margin(const GbtModel& model, const Matrix& X) {
  check_columns(model, X);
  const std::size_t G = model.groups();
  Matrix out(X.rows(), G);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto x = X.row(i);
    for (std::size_t k = 0; k < G; ++k) out(i, k) = model.base_score[k];
    for (std::size_t t = 0; t < model.trees.size(); ++t) out(i, t % G) += model.trees[t].predict(x);
  }
  return out;
}

Matrix predict_proba(const GbtModel& model, const Matrix& X) {
  Matrix m = predict_margin(model, X);
  if (model.objective == Objective::binary_logistic) {
    for (std::size_t i = 0; i < m.rows(); ++i) m(i, 0) = sigmoid(m(i, 0));
    return m;
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto p = softmax(m.row(i));
    std::copy(p.begin(), p.end(), m.row(i).begin());
  }
  return m;
}

double predict_positive(const GbtModel& model, std::span<const double> x) {
  if (x.size() != model.n_features) {
    throw Error(Errc::DimensionMismatch, "model expects " + std::to_string(model.n_features) +
                                             " features, got " + std::to_string(x.size()));
  }
  if (model.objective != Objective::binary_logistic) {
    throw Error(Errc::InvalidConfig, "predict_positive requires a binary model");
  }
  double s = model.base_score[0];
  for (const Tree& t : model.trees) s += t.predict(x);
  return sigmoid(s);
}

std::vector<int> predict_class(const GbtModel& model, const Matrix& X, double threshold) {
  Matrix p = predict_proba(model, X);
  std::vector<int> out(X.rows());
  if (model.objective == Objective::binary_logistic) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error(Errc::InvalidConfig, "threshold must lie in (0, 1)");
    for (std::size_t i = 0; i < X.rows(); ++i) out[i] = p(i, 0) >= threshold ? 1 : 0;
    return out;
  }
  for (std::size_t i = 0; i < X.rows(); ++i) {
    auto row = p.row(i);
    // max_element returns the first maximum, i.e. the lowest class id on ties
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double training_loss(const GbtModel& model, const Matrix& X, std::span<const int> y,
                     std::span<const double> weights) {
  Matrix m = predict_margin(model, X);
  double total = 0.0, wsum = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double w = weight_at(weights, i);
    total += model.objective == Objective::binary_logistic ? logistic_loss(m(i, 0), y[i], w)
                                                           : softmax_loss(m.row(i), y[i], w);
    wsum += w;
  }
  return wsum > 0.0 ? total / wsum : 0.0;
}

}  // namespace sbc
