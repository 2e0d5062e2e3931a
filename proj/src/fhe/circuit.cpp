#include "fhescale/fhe/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fhescale::fhe {

namespace {

using i128 = __int128;

// Interval over 128-bit integers; `overflow` marks results the analysis
// could not represent.
struct Wide {
  i128 lo = 0;
  i128 hi = 0;
  bool overflow = false;
};

Wide wide_point(std::int64_t v) { return {v, v, false}; }

Wide wide_add(const Wide& a, const Wide& b) {
  Wide r;
  r.overflow = a.overflow || b.overflow || __builtin_add_overflow(a.lo, b.lo, &r.lo) ||
               __builtin_add_overflow(a.hi, b.hi, &r.hi);
  return r;
}

Wide wide_mul(const Wide& a, const Wide& b) {
  Wide r;
  r.overflow = a.overflow || b.overflow;
  if (r.overflow) return r;
  i128 corners[4];
  const i128 xs[2] = {a.lo, a.hi};
  const i128 ys[2] = {b.lo, b.hi};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (__builtin_mul_overflow(xs[i], ys[j], &corners[i * 2 + j])) {
        r.overflow = true;
        return r;
      }
    }
  }
  r.lo = *std::min_element(corners, corners + 4);
  r.hi = *std::max_element(corners, corners + 4);
  return r;
}

int wide_bits(const Wide& w) {
  if (w.overflow) return 128;
  for (int bits = 1; bits < 128; ++bits) {
    const i128 max = (i128{1} << (bits - 1)) - 1;
    const i128 min = -max - 1;
    if (w.lo >= min && w.hi <= max) return bits;
  }
  return 128;
}

std::int64_t saturate(i128 v) {
  constexpr auto lo = std::numeric_limits<std::int64_t>::min();
  constexpr auto hi = std::numeric_limits<std::int64_t>::max();
  if (v < lo) return lo;
  if (v > hi) return hi;
  return static_cast<std::int64_t>(v);
}

RangeEntry make_entry(std::string node, const Wide& w) {
  RangeEntry e;
  e.node = std::move(node);
  if (w.overflow) {
    e.interval = {std::numeric_limits<std::int64_t>::min(), std::numeric_limits<std::int64_t>::max()};
  } else {
    e.interval = {saturate(w.lo), saturate(w.hi)};
  }
  e.required_bits = wide_bits(w);
  return e;
}

std::string class_node(std::size_t c, std::string_view suffix) {
  return "class[" + std::to_string(c) + "]." + std::string(suffix);
}

std::string horner_node(std::size_t c, int k, bool product) {
  return class_node(c, "horner[" + std::to_string(k) + "]" + (product ? ".mul" : ""));
}

// Wrapping helpers; Z/2^64 is the plaintext ring of the mock scheme.
std::int64_t wadd(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wmul(std::int64_t a, std::int64_t b) {
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

void check_circuit(const IntegerCircuit& c, std::size_t input_size) {
  if (c.weights.size() != c.n_classes * c.n_features || c.bias.size() != c.n_classes) {
    throw std::invalid_argument("circuit tensor shapes do not match its dimensions");
  }
  if (input_size != c.n_features) {
    throw std::invalid_argument("input has " + std::to_string(input_size) +
                                " features, circuit expects " + std::to_string(c.n_features));
  }
  if (c.activation && c.activation->coefficients.size() < 2) {
    throw std::invalid_argument("activation polynomial needs degree >= 1");
  }
}

}  // namespace

double IntegerPoly::output_scale() const { return std::ldexp(1.0, -frac_bits); }

int RangeReport::max_required_bits() const {
  int bits = 0;
  for (const auto& e : entries) bits = std::max(bits, e.required_bits);
  return bits;
}

const RangeEntry* RangeReport::find(std::string_view node) const {
  for (const auto& e : entries) {
    if (e.node == node) return &e;
  }
  return nullptr;
}

RangeReport analyze_ranges(const IntegerCircuit& circuit, Interval input) {
  check_circuit(circuit, circuit.n_features);
  if (input.lo > input.hi) throw std::invalid_argument("input interval is empty");
  RangeReport report;
  report.input = input;
  const Wide x{input.lo, input.hi, false};
  for (std::size_t c = 0; c < circuit.n_classes; ++c) {
    Wide dot = wide_point(0);
    for (std::size_t f = 0; f < circuit.n_features; ++f) {
      dot = wide_add(dot, wide_mul(wide_point(circuit.weights[c * circuit.n_features + f]), x));
    }
    report.entries.push_back(make_entry(class_node(c, "dot"), dot));
    const Wide score = wide_add(dot, wide_point(circuit.bias[c]));
    report.entries.push_back(make_entry(class_node(c, "score"), score));
    if (!circuit.activation) continue;

    const auto& coeffs = circuit.activation->coefficients;
    const int degree = static_cast<int>(coeffs.size()) - 1;
    Wide h = wide_point(coeffs[degree]);
    for (int k = degree - 1; k >= 0; --k) {
      const Wide product = wide_mul(h, score);
      report.entries.push_back(make_entry(horner_node(c, k, true), product));
      h = wide_add(product, wide_point(coeffs[k]));
      report.entries.push_back(make_entry(horner_node(c, k, false), h));
    }
  }
  return report;
}

std::vector<std::int64_t> trace_plain(const IntegerCircuit& circuit,
                                      std::span<const std::int64_t> input) {
  check_circuit(circuit, input.size());
  std::vector<std::int64_t> trace;
  for (std::size_t c = 0; c < circuit.n_classes; ++c) {
    std::int64_t dot = 0;
    for (std::size_t f = 0; f < circuit.n_features; ++f) {
      dot = wadd(dot, wmul(circuit.weights[c * circuit.n_features + f], input[f]));
    }
    trace.push_back(dot);
    const std::int64_t score = wadd(dot, circuit.bias[c]);
    trace.push_back(score);
    if (!circuit.activation) continue;
    const auto& coeffs = circuit.activation->coefficients;
    const int degree = static_cast<int>(coeffs.size()) - 1;
    std::int64_t h = coeffs[degree];
    for (int k = degree - 1; k >= 0; --k) {
      const std::int64_t product = wmul(h, score);
      trace.push_back(product);
      h = wadd(product, coeffs[k]);
      trace.push_back(h);
    }
  }
  return trace;
}

std::vector<std::int64_t> forward_plain(const IntegerCircuit& circuit,
                                        std::span<const std::int64_t> input) {
  const auto trace = trace_plain(circuit, input);
  const std::size_t per_class = trace.size() / circuit.n_classes;
  std::vector<std::int64_t> out(circuit.n_classes);
  for (std::size_t c = 0; c < circuit.n_classes; ++c) out[c] = trace[(c + 1) * per_class - 1];
  return out;
}

Interval InputQuant::integer_range() const {
  return {round_half_away(lo / scale) + zero_point, round_half_away(hi / scale) + zero_point};
}

InputQuant make_input_quant(double lo, double hi, int bits) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("input range must be finite with lo < hi");
  }
  InputQuant q;
  q.lo = lo;
  q.hi = hi;
  q.bits = bits;
  q.zero_point = 0;
  q.scale = std::max(std::fabs(lo), std::fabs(hi)) / static_cast<double>(signed_limit(bits));
  return q;
}

QuantizedInput quantize_input(const InputQuant& params, std::span<const double> features) {
  QuantizedInput out;
  out.values.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    double x = features[i];
    if (!std::isfinite(x)) throw std::invalid_argument("non-finite feature " + std::to_string(i));
    if (x < params.lo || x > params.hi) {
      out.clamped.push_back(i);
      x = std::clamp(x, params.lo, params.hi);
    }
    out.values.push_back(round_half_away(x / params.scale) + params.zero_point);
  }
  return out;
}

IntegerCircuit CircuitBundle::circuit() const {
  IntegerCircuit c;
  c.n_classes = model.n_classes;
  c.n_features = model.n_features;
  c.weights = model.weights.values;
  c.bias = model.bias.values;
  c.activation = activation_int;
  return c;
}

double CircuitBundle::output_scale() const {
  return activation_int ? activation_int->output_scale() : model.bias.scale;
}

ClientParams CircuitBundle::client_params() const {
  return ClientParams{model.n_features, model.n_classes, input, output_scale(), eval_key.key_id};
}

namespace {

std::optional<IntegerPoly> integer_activation(const ActivationPoly& poly, double score_scale,
                                              int frac_bits) {
  IntegerPoly ip;
  ip.frac_bits = frac_bits;
  ip.input_scale = score_scale;
  double power = std::ldexp(1.0, frac_bits);
  for (double c : poly.coefficients) {
    const double v = c * power;
    if (!std::isfinite(v) || std::fabs(v) > 0x1.0p62) return std::nullopt;
    ip.coefficients.push_back(round_half_away(v));
    power *= score_scale;
  }
  return ip;
}

const RangeEntry* first_over(const RangeReport& report, int capacity) {
  for (const auto& e : report.entries) {
    if (e.required_bits > capacity) return &e;
  }
  return nullptr;
}

}  // namespace

CircuitBundle compile_circuit(const FloatModel& model, const CompileOptions& options) {
  model.validate();
  if (options.capacity_bits < 8 || options.capacity_bits > 64) {
    throw std::invalid_argument("capacity_bits must be in [8, 64]");
  }
  CircuitBundle bundle;
  bundle.capacity_bits = options.capacity_bits;
  bundle.input = make_input_quant(options.input_lo, options.input_hi, options.bits);

  const QuantizedModel q = quantize_model(model, options.bits);
  bundle.model.n_classes = q.n_classes;
  bundle.model.n_features = q.n_features;
  bundle.model.weights = q.weights;

  // Re-express the quantized bias in accumulator units so it adds directly.
  const double acc_scale = q.weights.scale * bundle.input.scale;
  QuantizedTensor bias;
  bias.scale = acc_scale;
  bias.zero_point = 0;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  for (std::size_t c = 0; c < q.n_classes; ++c) {
    const double real = q.bias.dequantize(c);
    const double v = real / acc_scale;
    if (!std::isfinite(v) || std::fabs(v) > 0x1.0p62) {
      throw CompileError("bias of class " + std::to_string(c) + " does not fit the accumulator");
    }
    bias.values.push_back(round_half_away(v));
    lo = std::min(lo, bias.values.back());
    hi = std::max(hi, bias.values.back());
  }
  bias.bits = std::max(2, required_signed_bits(lo, hi));
  bundle.model.bias = std::move(bias);

  const Interval input_range = bundle.input.integer_range();
  IntegerCircuit circuit = bundle.circuit();
  RangeReport report = analyze_ranges(circuit, input_range);
  if (const auto* bad = first_over(report, options.capacity_bits)) {
    throw CompileError("node " + bad->node + " needs " + std::to_string(bad->required_bits) +
                       " bits, ciphertext capacity is " + std::to_string(options.capacity_bits));
  }

  if (options.activation) {
    bundle.activation = fit_activation_poly(options.activation_degree, options.fit_lo, options.fit_hi);
    // Pick the finest output precision whose Horner ranges still fit.
    std::string offending;
    for (int frac = 62; frac >= 0; --frac) {
      auto ip = integer_activation(*bundle.activation, acc_scale, frac);
      if (!ip) continue;
      circuit.activation = *ip;
      RangeReport trial = analyze_ranges(circuit, input_range);
      if (const auto* bad = first_over(trial, options.capacity_bits)) {
        offending = bad->node + " (" + std::to_string(bad->required_bits) + " bits)";
        continue;
      }
      bundle.activation_int = std::move(ip);
      report = std::move(trial);
      break;
    }
    if (!bundle.activation_int) {
      throw CompileError("activation does not fit ciphertext capacity " +
                         std::to_string(options.capacity_bits) + " bits at any precision; node " +
                         offending);
    }
  }
  bundle.ranges = std::move(report);
  bundle.eval_key = EvalKey{key_id_for_seed(options.key_seed), options.noise};
  return bundle;
}

EncryptedInput encrypt(const ClientParams& client, const SecretKey& key,
                       std::span<const double> features, std::uint64_t batch_nonce) {
  if (features.size() != client.n_features) {
    throw std::invalid_argument("feature vector has " + std::to_string(features.size()) +
                                " entries, circuit expects " + std::to_string(client.n_features));
  }
  const auto q = quantize_input(client.input, features);
  EncryptedInput out;
  out.clamped = q.clamped;
  out.values.reserve(q.values.size());
  for (std::size_t i = 0; i < q.values.size(); ++i) {
    out.values.push_back(key.encrypt(q.values[i], slot_nonce(batch_nonce, i)));
  }
  return out;
}

EvaluationResult evaluate(const CircuitBundle& bundle, const EvalKey& key,
                          std::span<const Ciphertext> input, bool bootstrapping) {
  if (key.key_id != bundle.eval_key.key_id) {
    throw KeyMismatchError("evaluation key does not belong to this circuit");
  }
  if (input.size() != bundle.model.n_features) {
    throw std::invalid_argument("encrypted input has " + std::to_string(input.size()) +
                                " slots, circuit expects " + std::to_string(bundle.model.n_features));
  }
  Evaluator ev(key, bootstrapping);
  const std::size_t nf = bundle.model.n_features;
  const auto& w = bundle.model.weights.values;
  EvaluationResult result;
  result.scores.reserve(bundle.model.n_classes);
  for (std::size_t c = 0; c < bundle.model.n_classes; ++c) {
    Ciphertext score = ev.dot_plain(input, std::span<const std::int64_t>(w.data() + c * nf, nf));
    score = ev.add_plain(score, bundle.model.bias.values[c]);
    if (bundle.activation_int) {
      const auto& coeffs = bundle.activation_int->coefficients;
      const int degree = static_cast<int>(coeffs.size()) - 1;
      Ciphertext h = ev.add_plain(ev.mul_plain(score, coeffs[degree]), coeffs[degree - 1]);
      for (int k = degree - 2; k >= 0; --k) h = ev.add_plain(ev.mul(h, score), coeffs[k]);
      score = std::move(h);
    }
    result.scores.push_back(std::move(score));
  }
  result.stats = ev.stats();
  return result;
}

Prediction decrypt(const SecretKey& key, const ClientParams& client,
                   std::span<const Ciphertext> scores) {
  if (scores.size() != client.n_classes) {
    throw std::invalid_argument("expected " + std::to_string(client.n_classes) + " score ciphertexts");
  }
  if (key.key_id() != client.key_id) {
    throw IntegrityError("secret key does not match the circuit's client parameters");
  }
  Prediction p;
  for (const auto& ct : scores) {
    p.raw.push_back(key.decrypt(ct));
    p.scores.push_back(static_cast<double>(p.raw.back()) * client.output_scale);
  }
  p.best_class = argmax(std::span<const std::int64_t>(p.raw));
  return p;
}

}  // namespace fhescale::fhe
