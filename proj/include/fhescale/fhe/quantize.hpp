#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fhescale/fhe/model.hpp"

namespace fhescale::fhe {

/// Integer tensor with an affine map back to reals:
/// real = (value - zero_point) * scale.
struct QuantizedTensor {
  std::vector<std::int64_t> values;
  double scale = 1.0;
  std::int64_t zero_point = 0;
  int bits = 8;

  double dequantize(std::size_t i) const {
    return static_cast<double>(values[i] - zero_point) * scale;
  }
  std::vector<double> dequantized() const;

  bool operator==(const QuantizedTensor&) const = default;
};

struct QuantizedModel {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  QuantizedTensor weights;
  QuantizedTensor bias;

  bool operator==(const QuantizedModel&) const = default;
};

/// Round half away from zero.
std::int64_t round_half_away(double x);

/// Largest magnitude representable with the given signed width: 2^(bits-1) - 1.
std::int64_t signed_limit(int bits);

/// Minimal signed two's-complement width containing [lo, hi].
int required_signed_bits(std::int64_t lo, std::int64_t hi);

/// Symmetric per-tensor quantization: zero_point = 0 and
/// scale = max|x| / (2^(bits-1) - 1). An all-zero tensor gets scale 1.
QuantizedTensor quantize_symmetric(std::span<const double> values, int bits);

/// Quantizes weights and bias as two independent symmetric tensors.
QuantizedModel quantize_model(const FloatModel& model, int bits);

}  // namespace fhescale::fhe
