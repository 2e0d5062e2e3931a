#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fhescale::fhe {

/// Multinomial logistic-regression weights, row-major [n_classes x n_features].
struct FloatModel {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  double weight(std::size_t cls, std::size_t feature) const {
    return weights[cls * n_features + feature];
  }
  std::span<const double> row(std::size_t cls) const {
    return {weights.data() + cls * n_features, n_features};
  }
  void validate() const;

  bool operator==(const FloatModel&) const = default;
};

/// Non-owning view of a labeled feature matrix.
struct LabeledMatrix {
  std::span<const double> features;  // row-major [n_samples x n_features]
  std::span<const int> labels;
  std::size_t n_features = 0;
  std::size_t n_classes = 0;

  std::size_t n_samples() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return features.subspan(i * n_features, n_features);
  }
};

struct TrainConfig {
  double learning_rate = 0.5;
  int epochs = 50;
  std::uint64_t seed = 0;
  double init_scale = 0.01;
};

struct TrainResult {
  FloatModel model;
  // loss_history[0] is the loss at initialization, then one entry per epoch.
  std::vector<double> loss_history;
  double final_learning_rate = 0.0;
};

/// Full-batch gradient descent on the softmax cross-entropy. Each epoch halves
/// the step until the loss strictly decreases (at most 40 halvings), so the
/// recorded loss history is monotone. Throws std::invalid_argument on empty
/// data, out-of-range labels or non-finite features.
TrainResult train_logreg(const LabeledMatrix& data, const TrainConfig& config);

double cross_entropy(const FloatModel& model, const LabeledMatrix& data);

/// Affine class scores w·x + b.
std::vector<double> predict_plaintext(const FloatModel& model,
                                      std::span<const double> features);

/// Index of the largest score; ties resolve to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

double accuracy(const FloatModel& model, const LabeledMatrix& data);

}  // namespace fhescale::fhe
