#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

// Mock homomorphic layer. NOT cryptographically secure.
//
// A ciphertext is a polynomial c(X) over Z/2^64 with c(s) = m, where s is a
// secret scalar derived from the key seed. Fresh encryptions are
// (m - a*s, a) with a drawn from a keyed stream indexed by the slot nonce.
// Addition and scalar multiplication act coefficient-wise and ciphertext
// products multiply polynomials, so evaluation never needs s. Noise is pure
// bookkeeping: each multiplication consumes one level and bootstrapping resets
// the counter.

namespace fhescale::fhe {

class NoiseOverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class KeyMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NoiseParams {
  int max_budget = 4;           // levels a ciphertext may consume
  int bootstrap_threshold = 3;  // refresh once a result reaches this level

  bool operator==(const NoiseParams&) const = default;
};

/// Server-visible key record. Holds no mask-generation state.
struct EvalKey {
  std::uint64_t key_id = 0;
  NoiseParams noise;

  bool operator==(const EvalKey&) const = default;
};

class SecretKey;
class Evaluator;

class Ciphertext {
 public:
  Ciphertext() = default;

  std::uint64_t key_id() const { return key_id_; }
  std::uint64_t nonce() const { return nonce_; }
  int noise_budget() const { return noise_; }
  int degree() const { return static_cast<int>(poly_.size()) - 1; }

  /// Payload comparison without exposing the payload.
  bool same_payload(const Ciphertext& other) const { return poly_ == other.poly_; }

 private:
  friend class SecretKey;
  friend class Evaluator;

  std::vector<std::uint64_t> poly_;
  std::uint64_t nonce_ = 0;  // 0 for evaluated ciphertexts
  std::uint64_t key_id_ = 0;
  int noise_ = 0;
};

/// Client-only key material.
class SecretKey {
 public:
  explicit SecretKey(std::uint64_t seed);

  std::uint64_t key_id() const { return key_id_; }

  Ciphertext encrypt(std::int64_t value, std::uint64_t slot_nonce) const;
  /// Throws IntegrityError on a foreign key, a nonce/mask mismatch, or a
  /// plaintext outside the representable window.
  std::int64_t decrypt(const Ciphertext& ct) const;

  bool operator==(const SecretKey&) const = default;

 private:
  std::uint64_t mask(std::uint64_t slot_nonce) const;

  std::uint64_t secret_;
  std::uint64_t mask_seed_;
  std::uint64_t key_id_;
};

struct KeyPair {
  SecretKey secret;
  EvalKey eval;
};

std::uint64_t key_id_for_seed(std::uint64_t seed);

/// Deterministic per seed.
KeyPair keygen(std::uint64_t seed, NoiseParams noise = {});

/// Nonce of slot `index` within an encryption batch.
std::uint64_t slot_nonce(std::uint64_t batch_nonce, std::size_t index);

struct EvaluatorStats {
  int bootstraps = 0;
  int peak_noise = 0;
  int multiplications = 0;
};

/// Server-side homomorphic operations. Every operation returns a ciphertext;
/// there is no path from a ciphertext to its plaintext here.
class Evaluator {
 public:
  Evaluator(EvalKey key, bool bootstrapping);

  Ciphertext add(const Ciphertext& a, const Ciphertext& b);
  Ciphertext add_plain(const Ciphertext& a, std::int64_t k);
  Ciphertext mul_plain(const Ciphertext& a, std::int64_t k);
  Ciphertext mul(const Ciphertext& a, const Ciphertext& b);
  /// sum_i k[i] * a[i]; one multiplicative level.
  Ciphertext dot_plain(std::span<const Ciphertext> a, std::span<const std::int64_t> k);
  Ciphertext bootstrap(const Ciphertext& a);

  const EvaluatorStats& stats() const { return stats_; }
  const EvalKey& key() const { return key_; }

 private:
  void check_key(const Ciphertext& a) const;
  Ciphertext finish(Ciphertext ct);

  EvalKey key_;
  bool bootstrapping_;
  EvaluatorStats stats_;
};

}  // namespace fhescale::fhe
