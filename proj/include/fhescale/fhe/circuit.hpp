#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fhescale/fhe/activation.hpp"
#include "fhescale/fhe/crypto.hpp"
#include "fhescale/fhe/model.hpp"
#include "fhescale/fhe/quantize.hpp"

namespace fhescale::fhe {

inline constexpr int kBundleFormatVersion = 1;

/// Polynomial with integer coefficients evaluated on the integer score z.
/// Approximates activation(z * input_scale) / 2^-frac_bits.
struct IntegerPoly {
  std::vector<std::int64_t> coefficients;  // lowest order first
  int frac_bits = 0;
  double input_scale = 1.0;

  int degree() const { return static_cast<int>(coefficients.size()) - 1; }
  double output_scale() const;

  bool operator==(const IntegerPoly&) const = default;
};

/// The integer-only forward pass: score[c] = sum_j W[c][j] * x[j] + B[c],
/// optionally followed by Horner evaluation of an IntegerPoly.
struct IntegerCircuit {
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  std::vector<std::int64_t> weights;  // row-major
  std::vector<std::int64_t> bias;     // accumulator scale
  std::optional<IntegerPoly> activation;
};

struct Interval {
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  bool contains(std::int64_t v) const { return lo <= v && v <= hi; }
  bool operator==(const Interval&) const = default;
};

struct RangeEntry {
  std::string node;
  Interval interval;
  // Up to 127 for nodes outside int64 (interval saturated), 128 when the
  // analysis itself overflowed 128-bit arithmetic.
  int required_bits = 0;

  bool operator==(const RangeEntry&) const = default;
};

/// Per-node value intervals. Entries follow evaluation order: for each class
/// "class[c].dot", "class[c].score", then for each Horner step k (from
/// degree-1 down to 0) "class[c].horner[k].mul" and "class[c].horner[k]".
struct RangeReport {
  Interval input;
  std::vector<RangeEntry> entries;

  int max_required_bits() const;
  const RangeEntry* find(std::string_view node) const;

  bool operator==(const RangeReport&) const = default;
};

/// Interval propagation through dot products, bias addition and Horner steps.
RangeReport analyze_ranges(const IntegerCircuit& circuit, Interval input);

/// Plaintext integer forward pass with wrapping 64-bit arithmetic.
std::vector<std::int64_t> forward_plain(const IntegerCircuit& circuit,
                                        std::span<const std::int64_t> input);

/// Every node value of the forward pass, aligned with RangeReport::entries.
std::vector<std::int64_t> trace_plain(const IntegerCircuit& circuit,
                                      std::span<const std::int64_t> input);

struct InputQuant {
  double scale = 1.0;
  std::int64_t zero_point = 0;
  double lo = 0.0;  // declared real-valued input range
  double hi = 0.0;
  int bits = 8;

  Interval integer_range() const;
  bool operator==(const InputQuant&) const = default;
};

InputQuant make_input_quant(double lo, double hi, int bits);

struct QuantizedInput {
  std::vector<std::int64_t> values;
  std::vector<std::size_t> clamped;  // indices that were outside [lo, hi]
};

QuantizedInput quantize_input(const InputQuant& params, std::span<const double> features);

/// Everything the client needs: input quantization and output rescaling.
struct ClientParams {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  InputQuant input;
  double output_scale = 1.0;
  std::uint64_t key_id = 0;

  bool operator==(const ClientParams&) const = default;
};

class CompileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CompileOptions {
  int bits = 8;
  double input_lo = -1.0;
  double input_hi = 1.0;
  bool activation = false;
  int activation_degree = 7;
  double fit_lo = -8.0;
  double fit_hi = 8.0;
  int capacity_bits = 64;
  std::uint64_t key_seed = 0;
  NoiseParams noise;
};

/// Self-contained compiled artifact; evaluation needs no float model.
struct CircuitBundle {
  QuantizedModel model;  // bias is stored at accumulator scale
  InputQuant input;
  std::optional<ActivationPoly> activation;
  std::optional<IntegerPoly> activation_int;
  RangeReport ranges;
  EvalKey eval_key;
  int capacity_bits = 64;

  IntegerCircuit circuit() const;
  ClientParams client_params() const;
  double output_scale() const;

  bool operator==(const CircuitBundle&) const = default;
};

/// quantize_model + optional activation lowering + range analysis. Throws
/// CompileError naming the first node whose width exceeds capacity_bits.
CircuitBundle compile_circuit(const FloatModel& model, const CompileOptions& options);

/// Fresh ciphertexts of the quantized features.
struct EncryptedInput {
  std::vector<Ciphertext> values;
  std::vector<std::size_t> clamped;
};

EncryptedInput encrypt(const ClientParams& client, const SecretKey& key,
                       std::span<const double> features, std::uint64_t batch_nonce);

struct EvaluationResult {
  std::vector<Ciphertext> scores;
  EvaluatorStats stats;
};

/// Server side: ciphertext in, ciphertext out. Throws KeyMismatchError when
/// the key does not belong to the bundle and NoiseOverflowError when the
/// circuit outgrows the noise budget without bootstrapping.
EvaluationResult evaluate(const CircuitBundle& bundle, const EvalKey& key,
                          std::span<const Ciphertext> input, bool bootstrapping = true);

struct Prediction {
  std::vector<std::int64_t> raw;
  std::vector<double> scores;
  std::size_t best_class = 0;
};

Prediction decrypt(const SecretKey& key, const ClientParams& client,
                   std::span<const Ciphertext> scores);

}  // namespace fhescale::fhe
