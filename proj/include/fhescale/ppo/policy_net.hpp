#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace fhescale::ppo {

inline constexpr int kStateDim = 2;
inline constexpr int kActions = 3;

struct NetLayout {
  int input = kStateDim;
  std::vector<int> hidden{64, 64};
  int actions = kActions;

  std::size_t parameter_count() const;
  void validate() const;
  bool operator==(const NetLayout&) const = default;
};

struct NetInit {
  std::uint64_t seed = 0;
  double policy_head_scale = 0.01;
  double value_head_scale = 1.0;
  bool zero_heads = false;
};

/// Batched forward pass; columns are samples.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> hidden;  // post-tanh activations per trunk layer
  Eigen::MatrixXd logits;               // actions x B
  Eigen::MatrixXd probs;                // actions x B
  Eigen::MatrixXd log_probs;            // actions x B
  Eigen::RowVectorXd values;            // 1 x B
};

struct PolicyOutput {
  std::array<double, kActions> probs{};
  std::array<double, kActions> logits{};
  double value = 0.0;
};

/// Shared tanh trunk with a policy head and a value head. All weights live
/// in one flat vector: per layer, W (out x in, column-major) then b.
class PolicyNet {
 public:
  explicit PolicyNet(NetLayout layout = {}, NetInit init = {});

  const NetLayout& layout() const { return layout_; }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }

  /// Throws std::invalid_argument on non-finite input.
  PolicyOutput forward(const std::array<double, kStateDim>& state) const;
  ForwardCache forward_batch(const Eigen::MatrixXd& states) const;

  /// Accumulates parameter gradients given dL/dlogits and dL/dvalue per
  /// sample (already scaled by 1/B if the loss is a mean).
  void backward(const ForwardCache& cache, const Eigen::MatrixXd& d_logits,
                const Eigen::RowVectorXd& d_values, Eigen::VectorXd& grad) const;

 private:
  struct Slice {
    Eigen::Index w_offset, b_offset;
    int rows, cols;
  };
  Eigen::Map<const Eigen::MatrixXd> weight(const Eigen::VectorXd& p, const Slice& s) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Eigen::VectorXd& p, const Slice& s) const;

  NetLayout layout_;
  std::vector<Slice> trunk_;
  Slice policy_head_{}, value_head_{};
  Eigen::VectorXd params_;
};

/// Numerically stable row-wise softmax of one logit vector.
std::array<double, kActions> softmax(const std::array<double, kActions>& logits);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary checkpoint, all integers and doubles little-endian:
/// magic "FHSPOLCY", u32 version (1), u32 input, u32 n_hidden, u32 hidden[],
/// u32 actions, u64 parameter count, f64 parameters[].
void save_checkpoint(const PolicyNet& net, const std::filesystem::path& path);
PolicyNet load_checkpoint(const std::filesystem::path& path);
/// Also checks the stored layout equals `expected`.
PolicyNet load_checkpoint(const std::filesystem::path& path, const NetLayout& expected);

}  // namespace fhescale::ppo
