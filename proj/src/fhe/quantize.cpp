#include "fhescale/fhe/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fhescale::fhe {

std::vector<double> QuantizedTensor::dequantized() const {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = dequantize(i);
  return out;
}

std::int64_t round_half_away(double x) {
  // std::llround rounds halfway cases away from zero.
  return static_cast<std::int64_t>(std::llround(x));
}

std::int64_t signed_limit(int bits) {
  if (bits < 2 || bits > 64) throw std::invalid_argument("bit width out of range: " + std::to_string(bits));
  if (bits == 64) return INT64_MAX;
  return (std::int64_t{1} << (bits - 1)) - 1;
}

int required_signed_bits(std::int64_t lo, std::int64_t hi) {
  int bits = 1;
  while (bits < 64) {
    const std::int64_t min = -(std::int64_t{1} << (bits - 1));
    const std::int64_t max = (std::int64_t{1} << (bits - 1)) - 1;
    if (lo >= min && hi <= max) return bits;
    ++bits;
  }
  return 64;
}

QuantizedTensor quantize_symmetric(std::span<const double> values, int bits) {
  if (bits < 2 || bits > 24) {
    throw std::invalid_argument("quantization bits must be in [2, 24], got " + std::to_string(bits));
  }
  double peak = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("cannot quantize non-finite value");
    peak = std::max(peak, std::fabs(v));
  }
  QuantizedTensor q;
  q.bits = bits;
  q.zero_point = 0;
  const auto limit = signed_limit(bits);
  q.scale = peak > 0.0 ? peak / static_cast<double>(limit) : 1.0;
  q.values.reserve(values.size());
  for (double v : values) {
    auto iv = round_half_away(v / q.scale);
    // max|x|/scale can land a hair above limit after division.
    iv = std::clamp(iv, -limit, limit);
    q.values.push_back(iv);
  }
  return q;
}

QuantizedModel quantize_model(const FloatModel& model, int bits) {
  model.validate();
  QuantizedModel q;
  q.n_classes = model.n_classes;
  q.n_features = model.n_features;
  q.weights = quantize_symmetric(model.weights, bits);
  q.bias = quantize_symmetric(model.bias, bits);
  return q;
}

}  // namespace fhescale::fhe
