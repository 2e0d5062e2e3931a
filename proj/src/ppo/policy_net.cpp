#include "fhescale/ppo/policy_net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "fhescale/common/random.hpp"

namespace fhescale::ppo {

std::size_t NetLayout::parameter_count() const {
  std::size_t n = 0;
  int prev = input;
  for (int h : hidden) {
    n += static_cast<std::size_t>(h) * static_cast<std::size_t>(prev + 1);
    prev = h;
  }
  return n + static_cast<std::size_t>(actions) * static_cast<std::size_t>(prev + 1) +
         static_cast<std::size_t>(prev + 1);
}

void NetLayout::validate() const {
  if (input < 1) throw std::invalid_argument("layout: input must be >= 1");
  if (actions < 2) throw std::invalid_argument("layout: actions must be >= 2");
  if (hidden.empty()) throw std::invalid_argument("layout: need at least one hidden layer");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("layout: hidden sizes must be >= 1");
}

PolicyNet::PolicyNet(NetLayout layout, NetInit init) : layout_(std::move(layout)) {
  layout_.validate();
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout_.parameter_count()));

  Eigen::Index offset = 0;
  auto make = [&](int rows, int cols) {
    Slice s{offset, offset + static_cast<Eigen::Index>(rows) * cols, rows, cols};
    offset = s.b_offset + rows;
    return s;
  };
  int prev = layout_.input;
  for (int h : layout_.hidden) {
    trunk_.push_back(make(h, prev));
    prev = h;
  }
  policy_head_ = make(layout_.actions, prev);
  value_head_ = make(1, prev);

  // Glorot-uniform weights, zero biases.
  Rng rng(init.seed);
  auto fill = [&](const Slice& s, double scale) {
    const double limit = std::sqrt(6.0 / (s.rows + s.cols));
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(s.rows) * s.cols; ++i)
      params_[s.w_offset + i] = scale * uniform_real(rng, -limit, limit);
  };
  for (const auto& s : trunk_) fill(s, 1.0);
  fill(policy_head_, init.zero_heads ? 0.0 : init.policy_head_scale);
  fill(value_head_, init.zero_heads ? 0.0 : init.value_head_scale);
}

Eigen::Map<const Eigen::MatrixXd> PolicyNet::weight(const Eigen::VectorXd& p, const Slice& s) const {
  return {p.data() + s.w_offset, s.rows, s.cols};
}

Eigen::Map<const Eigen::VectorXd> PolicyNet::bias(const Eigen::VectorXd& p, const Slice& s) const {
  return {p.data() + s.b_offset, s.rows};
}

ForwardCache PolicyNet::forward_batch(const Eigen::MatrixXd& states) const {
  if (states.rows() != layout_.input) throw std::invalid_argument("forward: state dimension mismatch");
  if (!states.allFinite()) throw std::invalid_argument("forward: non-finite state");
  ForwardCache c;
  c.input = states;
  const Eigen::MatrixXd* a = &c.input;
  for (const auto& s : trunk_) {
    Eigen::MatrixXd z = weight(params_, s) * *a;
    z.colwise() += bias(params_, s);
    c.hidden.push_back(z.array().tanh().matrix());
    a = &c.hidden.back();
  }
  c.logits = weight(params_, policy_head_) * *a;
  c.logits.colwise() += bias(params_, policy_head_);
  c.values = weight(params_, value_head_) * *a;
  c.values.array() += params_[value_head_.b_offset];

  const Eigen::RowVectorXd mx = c.logits.colwise().maxCoeff();
  Eigen::MatrixXd shifted = c.logits.rowwise() - mx;
  const Eigen::RowVectorXd log_z = shifted.array().exp().colwise().sum().log().matrix();
  c.log_probs = shifted.rowwise() - log_z;
  c.probs = c.log_probs.array().exp().matrix();
  return c;
}

PolicyOutput PolicyNet::forward(const std::array<double, kStateDim>& state) const {
  if (layout_.actions != kActions) throw std::logic_error("forward: layout is not 3-action");
  Eigen::MatrixXd x(kStateDim, 1);
  x << state[0], state[1];
  const auto c = forward_batch(x);
  PolicyOutput out;
  for (int k = 0; k < kActions; ++k) {
    out.logits[static_cast<std::size_t>(k)] = c.logits(k, 0);
    out.probs[static_cast<std::size_t>(k)] = c.probs(k, 0);
  }
  out.value = c.values(0);
  return out;
}

void PolicyNet::backward(const ForwardCache& cache, const Eigen::MatrixXd& d_logits,
                         const Eigen::RowVectorXd& d_values, Eigen::VectorXd& grad) const {
  if (grad.size() != params_.size()) grad = Eigen::VectorXd::Zero(params_.size());
  auto gw = [&](const Slice& s) { return Eigen::Map<Eigen::MatrixXd>(grad.data() + s.w_offset, s.rows, s.cols); };
  auto gb = [&](const Slice& s) { return Eigen::Map<Eigen::VectorXd>(grad.data() + s.b_offset, s.rows); };

  const Eigen::MatrixXd& top = cache.hidden.back();
  gw(policy_head_) += d_logits * top.transpose();
  gb(policy_head_) += d_logits.rowwise().sum();
  gw(value_head_) += d_values * top.transpose();
  gb(value_head_)(0) += d_values.sum();

  Eigen::MatrixXd dh = weight(params_, policy_head_).transpose() * d_logits +
                       weight(params_, value_head_).transpose() * d_values;
  for (std::size_t l = trunk_.size(); l-- > 0;) {
    const Eigen::MatrixXd& h = cache.hidden[l];
    const Eigen::MatrixXd dz = (dh.array() * (1.0 - h.array().square())).matrix();
    const Eigen::MatrixXd& below = l == 0 ? cache.input : cache.hidden[l - 1];
    gw(trunk_[l]) += dz * below.transpose();
    gb(trunk_[l]) += dz.rowwise().sum();
    if (l > 0) dh = weight(params_, trunk_[l]).transpose() * dz;
  }
}

std::array<double, kActions> softmax(const std::array<double, kActions>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::array<double, kActions> out{};
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) z += out[i] = std::exp(logits[i] - mx);
  for (auto& v : out) v /= z;
  return out;
}

namespace {

constexpr char kMagic[8] = {'F', 'H', 'S', 'P', 'O', 'L', 'C', 'Y'};
constexpr std::uint32_t kVersion = 1;

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <typename U>
U get_le(std::istream& in) {
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) throw CheckpointError("checkpoint truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const PolicyNet& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  const auto& L = net.layout();
  out.write(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(L.input));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(L.hidden.size()));
  for (int h : L.hidden) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(L.actions));
  const auto& p = net.parameters();
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p[i]));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

PolicyNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw CheckpointError("not a policy checkpoint: " + path.string());
  if (const auto v = get_le<std::uint32_t>(in); v != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(v));

  NetLayout layout;
  layout.input = static_cast<int>(get_le<std::uint32_t>(in));
  const auto n_hidden = get_le<std::uint32_t>(in);
  if (n_hidden > 64) throw CheckpointError("implausible hidden layer count");
  layout.hidden.clear();
  for (std::uint32_t i = 0; i < n_hidden; ++i) layout.hidden.push_back(static_cast<int>(get_le<std::uint32_t>(in)));
  layout.actions = static_cast<int>(get_le<std::uint32_t>(in));
  try {
    layout.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("bad layout: ") + e.what());
  }
  const auto count = get_le<std::uint64_t>(in);
  if (count != layout.parameter_count()) throw CheckpointError("parameter count does not match layout");

  PolicyNet net(layout, NetInit{.zero_heads = true});
  auto& p = net.parameters();
  for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes in checkpoint");
  if (!p.allFinite()) throw CheckpointError("non-finite parameters in checkpoint");
  return net;
}

PolicyNet load_checkpoint(const std::filesystem::path& path, const NetLayout& expected) {
  auto net = load_checkpoint(path);
  if (!(net.layout() == expected)) throw CheckpointError("checkpoint layout does not match config");
  return net;
}

}  // namespace fhescale::ppo
