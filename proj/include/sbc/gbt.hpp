#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "sbc/dataset.hpp"
#include "sbc/matrix.hpp"

namespace sbc {

struct GbtParams {
  int num_rounds = 100;
  double learning_rate = 0.3;
  int max_depth = 6;
  double min_child_weight = 1.0;  // minimum hessian sum per child
  double l2_lambda = 1.0;
  double subsample = 1.0;
  std::uint64_t seed = 0;

  // Throws InvalidConfig when a field is out of range.
  void validate() const;

  friend bool operator==(const GbtParams&, const GbtParams&) = default;
};

enum class Objective { binary_logistic, multiclass_softmax };

// Regression tree stored as parallel node arrays. Node 0 is the root; a node
// is a leaf when left[i] < 0. Rows with x[feature] < threshold go left,
// missing values follow default_left.
struct Tree {
  std::vector<int> left;
  std::vector<int> right;
  std::vector<int> feature;
  std::vector<double> threshold;
  std::vector<std::uint8_t> default_left;
  std::vector<double> value;           // leaf output, learning rate applied
  std::vector<double> hessian_sum;     // training hessian mass per node
  std::vector<int> depth;

  std::size_t size() const noexcept { return left.size(); }
  bool is_leaf(std::size_t node) const { return left[node] < 0; }
  std::size_t leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return value[leaf_index(x)]; }
  int max_depth() const;
};

struct GbtModel {
  Objective objective = Objective::binary_logistic;
  int n_classes = 2;
  std::size_t n_features = 0;
  std::vector<double> base_score;  // one per tree group
  // rounds x groups, round-major: trees[round * groups + k]
  std::vector<Tree> trees;
  GbtParams params;

  std::size_t groups() const noexcept {
    return objective == Objective::binary_logistic ? 1 : static_cast<std::size_t>(n_classes);
  }
  std::size_t rounds() const noexcept { return groups() == 0 ? 0 : trees.size() / groups(); }
};

// Gradient and hessian of the weighted loss with respect to the raw score.
struct GradPair {
  double grad = 0.0;
  double hess = 0.0;
};

double sigmoid(double score);
// Weighted logistic loss of raw score s for label y in {0,1}.
double logistic_loss(double score, int label, double weight);
GradPair logistic_grad(double score, int label, double weight);

// Weighted softmax cross-entropy for class `label` given raw scores.
double softmax_loss(std::span<const double> scores, int label, double weight);
std::vector<double> softmax(std::span<const double> scores);
// Per coordinate: g_k = w (p_k - [y=k]), h_k = w p_k (1 - p_k).
std::vector<GradPair> softmax_grad(std::span<const double> scores, int label, double weight);

// Newton leaf value -G / (H + lambda), before shrinkage.
double leaf_weight(double grad_sum, double hess_sum, double l2_lambda);

// `weights` may be empty, meaning unit weights.
GbtModel train_binary(const Matrix& X, std::span<const int> y, std::span<const double> weights,
                      const GbtParams& params);
GbtModel train_multiclass(const Matrix& X, std::span<const ClassId> y, int n_classes,
                          std::span<const double> weights, const GbtParams& params);

// Raw additive scores, rows x groups.
Matrix predict_margin(const GbtModel& model, const Matrix& X);
// Binary: rows x 1 positive-class probabilities. Softmax: rows x K.
Matrix predict_proba(const GbtModel& model, const Matrix& X);
double predict_positive(const GbtModel& model, std::span<const double> x);
// Binary: 1 iff p >= threshold. Softmax: argmax, ties to the lower class id.
std::vector<int> predict_class(const GbtModel& model, const Matrix& X, double threshold = 0.5);

// Mean weighted training loss of `model` on (X, y).
double training_loss(const GbtModel& model, const Matrix& X, std::span<const int> y,
                     std::span<const double> weights);

nlohmann::json to_json(const GbtModel& model);
GbtModel gbt_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GbtParams& params);
GbtParams gbt_params_from_json(const nlohmann::json& j);

std::string to_string(Objective objective);

}  // namespace sbc
