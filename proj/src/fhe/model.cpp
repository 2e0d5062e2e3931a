#include "fhescale/fhe/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fhescale/common/random.hpp"

namespace fhescale::fhe {

void FloatModel::validate() const {
  if (n_classes < 2) throw std::invalid_argument("model needs at least 2 classes");
  if (n_features == 0) throw std::invalid_argument("model needs at least 1 feature");
  if (weights.size() != n_classes * n_features || bias.size() != n_classes) {
    throw std::invalid_argument("model tensor shapes do not match its dimensions");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(weights.begin(), weights.end(), finite) ||
      !std::all_of(bias.begin(), bias.end(), finite)) {
    throw std::invalid_argument("model contains non-finite parameters");
  }
}

namespace {

void check_data(const LabeledMatrix& data) {
  if (data.n_samples() == 0) throw std::invalid_argument("training set is empty");
  if (data.n_classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (data.features.size() != data.n_samples() * data.n_features) {
    throw std::invalid_argument("feature matrix shape does not match label count");
  }
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    const int y = data.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= data.n_classes) {
      throw std::invalid_argument("label out of range at sample " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    if (!std::isfinite(data.features[i])) {
      throw std::invalid_argument("non-finite feature at sample " +
                                  std::to_string(i / data.n_features));
    }
  }
}

// Writes softmax probabilities of one sample into probs; returns -log p[label].
double sample_loss(const FloatModel& m, std::span<const double> x, int label,
                   std::vector<double>& probs) {
  double peak = -INFINITY;
  for (std::size_t c = 0; c < m.n_classes; ++c) {
    double z = m.bias[c];
    const auto w = m.row(c);
    for (std::size_t f = 0; f < m.n_features; ++f) z += w[f] * x[f];
    probs[c] = z;
    peak = std::max(peak, z);
  }
  double total = 0.0;
  for (auto& p : probs) {
    p = std::exp(p - peak);
    total += p;
  }
  for (auto& p : probs) p /= total;
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));
}

}  // namespace

double cross_entropy(const FloatModel& model, const LabeledMatrix& data) {
  std::vector<double> probs(model.n_classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    loss += sample_loss(model, data.row(i), data.labels[i], probs);
  }
  return loss / static_cast<double>(data.n_samples());
}

TrainResult train_logreg(const LabeledMatrix& data, const TrainConfig& config) {
  check_data(data);
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (config.epochs < 0) throw std::invalid_argument("epochs must be non-negative");

  FloatModel model;
  model.n_classes = data.n_classes;
  model.n_features = data.n_features;
  model.weights.resize(model.n_classes * model.n_features);
  model.bias.assign(model.n_classes, 0.0);
  Rng rng(config.seed);
  for (auto& w : model.weights) w = config.init_scale * standard_normal(rng);

  TrainResult result;
  double loss = cross_entropy(model, data);
  result.loss_history.push_back(loss);
  double lr = config.learning_rate;

  std::vector<double> grad_w(model.weights.size());
  std::vector<double> grad_b(model.n_classes);
  std::vector<double> probs(model.n_classes);
  const double inv_n = 1.0 / static_cast<double>(data.n_samples());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(grad_w.begin(), grad_w.end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (std::size_t i = 0; i < data.n_samples(); ++i) {
      const auto x = data.row(i);
      sample_loss(model, x, data.labels[i], probs);
      probs[static_cast<std::size_t>(data.labels[i])] -= 1.0;
      for (std::size_t c = 0; c < model.n_classes; ++c) {
        const double g = probs[c] * inv_n;
        grad_b[c] += g;
        double* gw = grad_w.data() + c * model.n_features;
        for (std::size_t f = 0; f < model.n_features; ++f) gw[f] += g * x[f];
      }
    }

    bool improved = false;
    for (int halving = 0; halving < 40 && !improved; ++halving) {
      FloatModel trial = model;
      for (std::size_t k = 0; k < trial.weights.size(); ++k) trial.weights[k] -= lr * grad_w[k];
      for (std::size_t c = 0; c < trial.n_classes; ++c) trial.bias[c] -= lr * grad_b[c];
      const double trial_loss = cross_entropy(trial, data);
      if (trial_loss < loss) {
        model = std::move(trial);
        loss = trial_loss;
        improved = true;
      } else {
        lr *= 0.5;
      }
    }
    if (!improved) break;  // at a stationary point for this precision
    result.loss_history.push_back(loss);
  }
  result.model = std::move(model);
  result.final_learning_rate = lr;
  return result;
}

std::vector<double> predict_plaintext(const FloatModel& model,
                                      std::span<const double> features) {
  if (features.size() != model.n_features) {
    throw std::invalid_argument("feature vector has " + std::to_string(features.size()) +
                                " entries, model expects " +
                                std::to_string(model.n_features));
  }
  std::vector<double> scores(model.n_classes);
  for (std::size_t c = 0; c < model.n_classes; ++c) {
    double z = model.bias[c];
    const auto w = model.row(c);
    for (std::size_t f = 0; f < model.n_features; ++f) z += w[f] * features[f];
    scores[c] = z;
  }
  return scores;
}

double accuracy(const FloatModel& model, const LabeledMatrix& data) {
  if (data.n_samples() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.n_samples(); ++i) {
    const auto scores = predict_plaintext(model, data.row(i));
    if (argmax(std::span<const double>(scores)) == static_cast<std::size_t>(data.labels[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.n_samples());
}

}  // namespace fhescale::fhe
