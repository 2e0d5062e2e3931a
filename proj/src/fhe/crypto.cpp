#include "fhescale/fhe/crypto.hpp"

#include <algorithm>
#include <string>

#include "fhescale/common/random.hpp"

namespace fhescale::fhe {

namespace {

constexpr std::uint64_t kSecretTag = 0x5ec2e7ULL;
constexpr std::uint64_t kMaskTag = 0x3a5cULL;
constexpr std::uint64_t kIdTag = 0x1dULL;
// Decrypted values must lie in [-2^62, 2^62); anything outside signals a
// wrong key or a corrupted ciphertext.
constexpr std::int64_t kPlainWindow = std::int64_t{1} << 62;

std::uint64_t wrap(std::int64_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace

std::uint64_t key_id_for_seed(std::uint64_t seed) {
  const auto id = mix_seed(seed, kIdTag);
  return id == 0 ? 1 : id;
}

SecretKey::SecretKey(std::uint64_t seed)
    : secret_(mix_seed(seed, kSecretTag) | 1ULL),
      mask_seed_(mix_seed(seed, kMaskTag)),
      key_id_(key_id_for_seed(seed)) {}

std::uint64_t SecretKey::mask(std::uint64_t nonce) const { return mix_seed(mask_seed_, nonce); }

Ciphertext SecretKey::encrypt(std::int64_t value, std::uint64_t nonce) const {
  if (nonce == 0) throw std::invalid_argument("slot nonce 0 is reserved for evaluated ciphertexts");
  Ciphertext ct;
  const std::uint64_t a = mask(nonce);
  ct.poly_ = {wrap(value) - a * secret_, a};
  ct.nonce_ = nonce;
  ct.key_id_ = key_id_;
  ct.noise_ = 0;
  return ct;
}

std::int64_t SecretKey::decrypt(const Ciphertext& ct) const {
  if (ct.key_id_ != key_id_) {
    throw IntegrityError("ciphertext was produced under a different key");
  }
  if (ct.poly_.empty()) throw IntegrityError("empty ciphertext");
  if (ct.nonce_ != 0 && (ct.poly_.size() != 2 || ct.poly_[1] != mask(ct.nonce_))) {
    throw IntegrityError("nonce mismatch: mask does not match slot nonce");
  }
  std::uint64_t acc = 0;
  for (auto it = ct.poly_.rbegin(); it != ct.poly_.rend(); ++it) acc = acc * secret_ + *it;
  const auto value = static_cast<std::int64_t>(acc);
  if (value < -kPlainWindow || value >= kPlainWindow) {
    throw IntegrityError("decrypted value outside the plaintext window");
  }
  return value;
}

KeyPair keygen(std::uint64_t seed, NoiseParams noise) {
  if (noise.max_budget < 1 || noise.bootstrap_threshold < 1 ||
      noise.bootstrap_threshold > noise.max_budget) {
    throw std::invalid_argument("noise parameters need 1 <= bootstrap_threshold <= max_budget");
  }
  return KeyPair{SecretKey(seed), EvalKey{key_id_for_seed(seed), noise}};
}

std::uint64_t slot_nonce(std::uint64_t batch_nonce, std::size_t index) {
  const auto n = mix_seed(batch_nonce, static_cast<std::uint64_t>(index) + 1);
  return n == 0 ? 1 : n;
}

Evaluator::Evaluator(EvalKey key, bool bootstrapping)
    : key_(key), bootstrapping_(bootstrapping) {}

void Evaluator::check_key(const Ciphertext& a) const {
  if (a.key_id_ != key_.key_id) {
    throw KeyMismatchError("ciphertext key does not match the evaluation key");
  }
}

Ciphertext Evaluator::finish(Ciphertext ct) {
  ct.nonce_ = 0;
  ct.key_id_ = key_.key_id;
  if (ct.noise_ > key_.noise.max_budget) {
    throw NoiseOverflowError("noise budget exhausted: level " + std::to_string(ct.noise_) +
                             " exceeds maximum " + std::to_string(key_.noise.max_budget) +
                             (bootstrapping_ ? "" : " (bootstrapping disabled)"));
  }
  stats_.peak_noise = std::max(stats_.peak_noise, ct.noise_);
  if (bootstrapping_ && ct.noise_ >= key_.noise.bootstrap_threshold) return bootstrap(ct);
  return ct;
}

Ciphertext Evaluator::add(const Ciphertext& a, const Ciphertext& b) {
  check_key(a);
  check_key(b);
  Ciphertext out;
  out.poly_.assign(std::max(a.poly_.size(), b.poly_.size()), 0);
  for (std::size_t i = 0; i < a.poly_.size(); ++i) out.poly_[i] += a.poly_[i];
  for (std::size_t i = 0; i < b.poly_.size(); ++i) out.poly_[i] += b.poly_[i];
  out.noise_ = std::max(a.noise_, b.noise_);
  return finish(std::move(out));
}

Ciphertext Evaluator::add_plain(const Ciphertext& a, std::int64_t k) {
  check_key(a);
  Ciphertext out = a;
  out.poly_[0] += wrap(k);
  return finish(std::move(out));
}

Ciphertext Evaluator::mul_plain(const Ciphertext& a, std::int64_t k) {
  check_key(a);
  Ciphertext out = a;
  for (auto& c : out.poly_) c *= wrap(k);
  out.noise_ = a.noise_ + 1;
  ++stats_.multiplications;
  return finish(std::move(out));
}

Ciphertext Evaluator::mul(const Ciphertext& a, const Ciphertext& b) {
  check_key(a);
  check_key(b);
  Ciphertext out;
  out.poly_.assign(a.poly_.size() + b.poly_.size() - 1, 0);
  for (std::size_t i = 0; i < a.poly_.size(); ++i) {
    for (std::size_t j = 0; j < b.poly_.size(); ++j) out.poly_[i + j] += a.poly_[i] * b.poly_[j];
  }
  out.noise_ = std::max(a.noise_, b.noise_) + 1;
  ++stats_.multiplications;
  return finish(std::move(out));
}

Ciphertext Evaluator::dot_plain(std::span<const Ciphertext> a,
                                std::span<const std::int64_t> k) {
  if (a.empty() || a.size() != k.size()) {
    throw std::invalid_argument("dot_plain needs equal, non-zero lengths");
  }
  std::size_t width = 0;
  int noise = 0;
  for (const auto& ct : a) {
    check_key(ct);
    width = std::max(width, ct.poly_.size());
    noise = std::max(noise, ct.noise_);
  }
  Ciphertext out;
  out.poly_.assign(width, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto factor = wrap(k[i]);
    const auto& poly = a[i].poly_;
    for (std::size_t j = 0; j < poly.size(); ++j) out.poly_[j] += factor * poly[j];
  }
  out.noise_ = noise + 1;
  ++stats_.multiplications;
  return finish(std::move(out));
}

Ciphertext Evaluator::bootstrap(const Ciphertext& a) {
  check_key(a);
  Ciphertext out = a;
  out.noise_ = 0;
  ++stats_.bootstraps;
  return out;
}

}  // namespace fhescale::fhe
