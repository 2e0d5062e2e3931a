#include <doctest.h>

#include <filesystem>
#include <type_traits>
#include <vector>

#include "fhescale/common/random.hpp"
#include "fhescale/fhe/bundle_io.hpp"
#include "fhescale/fhe/circuit.hpp"

using namespace fhescale;
using namespace fhescale::fhe;

namespace {

// Brute-force bound: a linear form over a box peaks at a vertex.
std::pair<std::int64_t, std::int64_t> vertex_extremes(const std::vector<std::int64_t>& w,
                                                      std::int64_t bias, Interval x) {
  const std::size_t n = w.size();
  std::int64_t lo = INT64_MAX, hi = INT64_MIN;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    std::int64_t v = bias;
    for (std::size_t j = 0; j < n; ++j) v += w[j] * ((mask >> j) & 1 ? x.hi : x.lo);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

FloatModel random_model(Rng& rng, std::size_t classes, std::size_t features) {
  FloatModel m;
  m.n_classes = classes;
  m.n_features = features;
  for (std::size_t i = 0; i < classes * features; ++i) m.weights.push_back(standard_normal(rng));
  for (std::size_t c = 0; c < classes; ++c) m.bias.push_back(0.3 * standard_normal(rng));
  return m;
}

// Independent integer oracle using 128-bit arithmetic.
std::vector<std::int64_t> oracle_forward(const CircuitBundle& b, const std::vector<std::int64_t>& q) {
  std::vector<std::int64_t> out;
  const auto nf = b.model.n_features;
  for (std::size_t c = 0; c < b.model.n_classes; ++c) {
    __int128 z = b.model.bias.values[c];
    for (std::size_t j = 0; j < nf; ++j) z += __int128{b.model.weights.values[c * nf + j]} * q[j];
    if (b.activation_int) {
      const auto& a = b.activation_int->coefficients;
      __int128 h = 0;
      for (std::size_t k = a.size(); k-- > 0;) h = h * z + a[k];
      z = h;
    }
    REQUIRE(z >= INT64_MIN);
    REQUIRE(z <= INT64_MAX);
    out.push_back(static_cast<std::int64_t>(z));
  }
  return out;
}

}  // namespace

TEST_CASE("range analysis: 10-feature accumulator") {
  IntegerCircuit c;
  c.n_classes = 2;
  c.n_features = 10;
  c.weights.assign(10, 127);
  for (int j = 0; j < 10; ++j) c.weights.push_back(j % 2 ? -127 : 127);
  c.bias = {0, 0};
  const Interval x{0, 255};
  const auto report = analyze_ranges(c, x);
  for (std::size_t cls = 0; cls < 2; ++cls) {
    const auto* dot = report.find("class[" + std::to_string(cls) + "].dot");
    REQUIRE(dot);
    CHECK(dot->interval.lo >= -323850);
    CHECK(dot->interval.hi <= 323850);
    const auto [lo, hi] = vertex_extremes(
        std::vector<std::int64_t>(c.weights.begin() + cls * 10, c.weights.begin() + cls * 10 + 10), 0, x);
    CHECK(dot->interval == Interval{lo, hi});
    CHECK(dot->required_bits == required_signed_bits(lo, hi));
  }
  CHECK(report.find("class[0].dot")->required_bits == 20);
}

TEST_CASE("range analysis: zero weights collapse to the bias") {
  IntegerCircuit c{3, 4, std::vector<std::int64_t>(12, 0), {5, -9, 0}, std::nullopt};
  const auto report = analyze_ranges(c, {-100, 100});
  CHECK(report.find("class[0].score")->interval == Interval{5, 5});
  CHECK(report.find("class[1].score")->interval == Interval{-9, -9});
  CHECK(report.find("class[2].score")->interval == Interval{0, 0});
}

TEST_CASE("range analysis is sound under fuzzing, with activation") {
  Rng rng(3);
  const FloatModel m = random_model(rng, 5, 8);
  CompileOptions opt;
  opt.bits = 5;
  opt.input_lo = -2.0;
  opt.input_hi = 2.0;
  opt.activation = true;
  opt.activation_degree = 3;
  const auto bundle = compile_circuit(m, opt);
  const auto circuit = bundle.circuit();
  const auto range = bundle.input.integer_range();
  std::vector<std::int64_t> q(8);
  for (int trial = 0; trial < 10000; ++trial) {
    for (auto& v : q) v = uniform_int(rng, range.lo, range.hi);
    const auto trace = trace_plain(circuit, q);
    REQUIRE(trace.size() == bundle.ranges.entries.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
      CHECK_MESSAGE(bundle.ranges.entries[i].interval.contains(trace[i]), bundle.ranges.entries[i].node);
    }
  }
}

TEST_CASE("compile: hand-computed toy circuit") {
  // Worked by hand: weight scale 1/7, q_w = [7,-4,2,5]; bias quantizes to
  // [5,-7] at scale 0.2/7, i.e. [7,-10] at accumulator scale 1/49;
  // x = [0.55,-0.3] -> q = [4,-2]; scores 28+8+7 = 43 and 8-10-10 = -12.
  FloatModel m{2, 2, {1.0, -0.6, 0.25, 0.75}, {0.15, -0.2}};
  CompileOptions opt;
  opt.bits = 4;
  opt.input_lo = -1.0;
  opt.input_hi = 1.0;
  const auto bundle = compile_circuit(m, opt);
  CHECK(bundle.model.weights.values == std::vector<std::int64_t>{7, -4, 2, 5});
  CHECK(bundle.model.bias.values == std::vector<std::int64_t>{7, -10});
  const std::vector<double> x{0.55, -0.3};
  const auto q = quantize_input(bundle.input, x);
  CHECK(q.values == std::vector<std::int64_t>{4, -2});
  CHECK(forward_plain(bundle.circuit(), q.values) == std::vector<std::int64_t>{43, -12});

  const auto keys = keygen(opt.key_seed);
  const auto enc = encrypt(bundle.client_params(), keys.secret, x, 99);
  const auto out = evaluate(bundle, keys.eval, enc.values);
  const auto pred = decrypt(keys.secret, bundle.client_params(), out.scores);
  CHECK(pred.raw == std::vector<std::int64_t>{43, -12});
  CHECK(pred.scores[0] == doctest::Approx(43.0 / 49.0));
  CHECK(pred.best_class == 0);
}

TEST_CASE("compile: capacity overflow names the offending node") {
  Rng rng(8);
  const FloatModel m = random_model(rng, 3, 49);
  CompileOptions opt;
  opt.bits = 8;
  opt.capacity_bits = 12;
  try {
    compile_circuit(m, opt);
    FAIL("expected CompileError");
  } catch (const CompileError& e) {
    CHECK(std::string(e.what()).find("class[0].") != std::string::npos);
  }
}

TEST_CASE("compile: bundle serialization round-trips") {
  Rng rng(21);
  const FloatModel m = random_model(rng, 4, 6);
  CompileOptions opt;
  opt.activation = true;
  opt.activation_degree = 5;
  opt.bits = 6;
  opt.key_seed = 1234;
  const auto bundle = compile_circuit(m, opt);
  const auto dir = std::filesystem::temp_directory_path() / "fhescale_bundle_roundtrip";
  std::filesystem::remove_all(dir);
  save_bundle(bundle, dir);
  CHECK(std::filesystem::exists(dir / kCircuitFile));
  CHECK(std::filesystem::exists(dir / kEvalKeyFile));
  CHECK(std::filesystem::exists(dir / kClientFile));
  const auto loaded = load_bundle(dir);
  CHECK(loaded == bundle);
  std::filesystem::remove_all(dir);
}

TEST_CASE("keygen is deterministic and seeds separate mask streams") {
  const auto a = keygen(17);
  const auto b = keygen(17);
  CHECK(a.secret == b.secret);
  CHECK(a.eval == b.eval);
  const auto c = keygen(18);
  int identical = 0;
  for (std::int64_t v = -50; v < 50; ++v) {
    if (a.secret.encrypt(v, 1000 + v + 50).same_payload(c.secret.encrypt(v, 1000 + v + 50))) ++identical;
  }
  CHECK(identical == 0);
  // The evaluation key is exactly an id plus noise parameters.
  auto [id, noise] = a.eval;
  CHECK(id == key_id_for_seed(17));
  CHECK(noise == NoiseParams{});
}

TEST_CASE("encrypt/decrypt round-trip equals input quantization") {
  Rng rng(4);
  const FloatModel m = random_model(rng, 3, 7);
  CompileOptions opt;
  opt.input_lo = -3.0;
  opt.input_hi = 3.0;
  const auto bundle = compile_circuit(m, opt);
  const auto keys = keygen(opt.key_seed);
  std::vector<double> x(7);
  for (int trial = 0; trial < 200; ++trial) {
    for (auto& v : x) v = uniform_real(rng, -3.0, 3.0);
    const auto enc = encrypt(bundle.client_params(), keys.secret, x, static_cast<std::uint64_t>(trial + 1));
    const auto q = quantize_input(bundle.input, x);
    CHECK(enc.clamped.empty());
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(keys.secret.decrypt(enc.values[i]) == q.values[i]);
      CHECK(enc.values[i].noise_budget() == 0);
    }
  }
}

TEST_CASE("fresh nonces give different payloads; out-of-range is clamped") {
  Rng rng(4);
  const FloatModel m = random_model(rng, 2, 3);
  CompileOptions opt;
  const auto bundle = compile_circuit(m, opt);
  const auto keys = keygen(0);
  const std::vector<double> x{0.2, -0.4, 0.9};
  const auto e1 = encrypt(bundle.client_params(), keys.secret, x, 1);
  const auto e2 = encrypt(bundle.client_params(), keys.secret, x, 2);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK_FALSE(e1.values[i].same_payload(e2.values[i]));

  const std::vector<double> wild{5.0, -0.4, -7.0};
  const auto e3 = encrypt(bundle.client_params(), keys.secret, wild, 3);
  CHECK(e3.clamped == std::vector<std::size_t>{0, 2});
  CHECK(keys.secret.decrypt(e3.values[0]) == bundle.input.integer_range().hi);
  CHECK(keys.secret.decrypt(e3.values[2]) == bundle.input.integer_range().lo);

  const std::vector<double> short_x{0.1};
  CHECK_THROWS_AS(encrypt(bundle.client_params(), keys.secret, short_x, 4), std::invalid_argument);
}

TEST_CASE("homomorphic evaluation equals the plaintext integer pass") {
  for (std::uint64_t seed : {1ULL, 2ULL}) {
    Rng rng(seed);
    const FloatModel m = random_model(rng, 6, 9);
    for (bool act : {false, true}) {
      CompileOptions opt;
      opt.input_lo = -2.0;
      opt.input_hi = 2.0;
      opt.activation = act;
      opt.activation_degree = 3;
      opt.bits = act ? 4 : 8;
      opt.key_seed = seed * 10;
      const auto bundle = compile_circuit(m, opt);
      const auto keys = keygen(opt.key_seed);
      const auto client = bundle.client_params();
      std::vector<double> x(9);
      for (int trial = 0; trial < 300; ++trial) {
        for (auto& v : x) v = uniform_real(rng, -2.0, 2.0);
        const auto enc = encrypt(client, keys.secret, x, static_cast<std::uint64_t>(trial + 1));
        const auto out = evaluate(bundle, keys.eval, enc.values);
        const auto pred = decrypt(keys.secret, client, out.scores);
        const auto expected = oracle_forward(bundle, quantize_input(bundle.input, x).values);
        CHECK(pred.raw == expected);
        CHECK(pred.best_class == argmax(std::span<const std::int64_t>(expected)));
        for (double s : pred.scores) CHECK(std::isfinite(s));
      }
    }
  }
}

TEST_CASE("zero input decrypts to the quantized biases") {
  Rng rng(12);
  const FloatModel m = random_model(rng, 4, 5);
  const auto bundle = compile_circuit(m, {});
  const auto keys = keygen(0);
  const std::vector<double> zero(5, 0.0);
  const auto enc = encrypt(bundle.client_params(), keys.secret, zero, 7);
  const auto pred = decrypt(keys.secret, bundle.client_params(), evaluate(bundle, keys.eval, enc.values).scores);
  CHECK(pred.raw == bundle.model.bias.values);
}

TEST_CASE("noise budget: deep circuit needs bootstrapping") {
  Rng rng(13);
  const FloatModel m = random_model(rng, 2, 3);
  CompileOptions opt;
  opt.activation = true;
  opt.activation_degree = 7;
  opt.bits = 3;
  const auto bundle = compile_circuit(m, opt);
  const auto keys = keygen(0);
  const std::vector<double> x{0.3, -0.2, 0.7};
  const auto enc = encrypt(bundle.client_params(), keys.secret, x, 5);
  CHECK_THROWS_AS(evaluate(bundle, keys.eval, enc.values, false), NoiseOverflowError);
  const auto out = evaluate(bundle, keys.eval, enc.values, true);
  CHECK(out.stats.bootstraps > 0);
  CHECK(out.stats.peak_noise <= keys.eval.noise.max_budget);
  CHECK(decrypt(keys.secret, bundle.client_params(), out.scores).raw ==
        oracle_forward(bundle, quantize_input(bundle.input, x).values));

  // A degree-3 circuit fits the budget without refreshes.
  opt.activation_degree = 3;
  const auto shallow = compile_circuit(m, opt);
  CHECK_NOTHROW(evaluate(shallow, keys.eval, encrypt(shallow.client_params(), keys.secret, x, 6).values, false));
}

TEST_CASE("noise bookkeeping on the evaluator") {
  const auto keys = keygen(3, NoiseParams{3, 3});
  const auto a = keys.secret.encrypt(5, 1);
  Evaluator plain(keys.eval, false);
  auto x = plain.mul_plain(a, 2);
  CHECK(x.noise_budget() == 1);
  x = plain.add(x, a);
  CHECK(x.noise_budget() == 1);
  x = plain.mul(x, x);
  CHECK(x.noise_budget() == 2);
  x = plain.mul(x, a);
  CHECK(x.noise_budget() == 3);
  CHECK_THROWS_AS(plain.mul(x, a), NoiseOverflowError);
  const auto fresh = plain.bootstrap(x);
  CHECK(fresh.noise_budget() == 0);
  CHECK(keys.secret.decrypt(fresh) == keys.secret.decrypt(x));
  CHECK(keys.secret.decrypt(x) == (5 * 2 + 5) * (5 * 2 + 5) * 5);
}

TEST_CASE("key mismatch and wrong-key decryption fail loudly") {
  Rng rng(14);
  const FloatModel m = random_model(rng, 2, 3);
  CompileOptions opt;
  opt.key_seed = 1;
  const auto bundle = compile_circuit(m, opt);
  const auto keys = keygen(1);
  const auto other = keygen(2);
  const std::vector<double> x{0.1, 0.2, 0.3};
  const auto enc = encrypt(bundle.client_params(), keys.secret, x, 9);
  CHECK_THROWS_AS(evaluate(bundle, other.eval, enc.values), KeyMismatchError);
  const auto foreign = encrypt(bundle.client_params(), other.secret, x, 9);
  CHECK_THROWS_AS(evaluate(bundle, keys.eval, foreign.values), KeyMismatchError);

  const auto out = evaluate(bundle, keys.eval, enc.values);
  CHECK_THROWS_AS(decrypt(other.secret, bundle.client_params(), out.scores), IntegrityError);
  CHECK_THROWS_AS(other.secret.decrypt(enc.values[0]), IntegrityError);
}

TEST_CASE("server interface never yields plaintext") {
  static_assert(!std::is_convertible_v<Ciphertext, std::int64_t>);
  static_assert(std::is_same_v<decltype(std::declval<Evaluator&>().add(std::declval<Ciphertext>(), std::declval<Ciphertext>())), Ciphertext>);
  static_assert(std::is_same_v<decltype(std::declval<Evaluator&>().mul(std::declval<Ciphertext>(), std::declval<Ciphertext>())), Ciphertext>);
  static_assert(std::is_same_v<decltype(std::declval<Evaluator&>().bootstrap(std::declval<Ciphertext>())), Ciphertext>);
  static_assert(std::is_same_v<decltype(evaluate(std::declval<const CircuitBundle&>(), std::declval<const EvalKey&>(),
                                                 std::declval<std::span<const Ciphertext>>(), true)),
                               EvaluationResult>);
  CHECK(true);
}

TEST_CASE("quantized argmax agrees with float argmax more often at 8 bits than at 2") {
  Rng rng(77);
  const FloatModel m = random_model(rng, 10, 12);
  auto agreement = [&](int bits) {
    CompileOptions opt;
    opt.bits = bits;
    opt.input_lo = -2.0;
    opt.input_hi = 2.0;
    const auto bundle = compile_circuit(m, opt);
    Rng data_rng(5);
    int hits = 0;
    std::vector<double> x(12);
    for (int i = 0; i < 2000; ++i) {
      for (auto& v : x) v = uniform_real(data_rng, -2.0, 2.0);
      const auto fs = predict_plaintext(m, x);
      const auto qs = forward_plain(bundle.circuit(), quantize_input(bundle.input, x).values);
      hits += argmax(std::span<const double>(fs)) == argmax(std::span<const std::int64_t>(qs));
    }
    return hits;
  };
  const int a8 = agreement(8);
  const int a2 = agreement(2);
  CHECK(a8 >= a2);
  CHECK(a8 > 1900);
}
