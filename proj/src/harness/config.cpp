#include "fhescale/harness/config.hpp"

#include <fstream>
#include <limits>
#include <set>
#include <type_traits>

namespace fhescale::harness {

using nlohmann::json;

namespace {

/// Reads known keys of one JSON object and rejects the rest.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(label() + ": expected an object");
  }

  template <typename T>
  Section& get(const char* key, T& dst) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return *this;
    const std::string where = prefix() + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(where + ": expected a boolean");
      dst = it->template get<bool>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_unsigned()) throw ConfigError(where + ": expected a non-negative integer");
      dst = it->template get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError(where + ": expected an integer");
      const auto v = it->template get<std::int64_t>();
      if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max())
        throw ConfigError(where + ": integer out of range");
      dst = static_cast<T>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError(where + ": expected a number");
      dst = it->template get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError(where + ": expected a string");
      dst = it->template get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!it->is_array()) throw ConfigError(where + ": expected an array of integers");
      dst.clear();
      for (const auto& e : *it) {
        if (!e.is_number_integer()) throw ConfigError(where + ": expected an array of integers");
        dst.push_back(e.template get<int>());
      }
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
    return *this;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [key, _] : obj_.items())
      if (!seen_.count(key)) throw ConfigError(prefix() + key + ": unknown field");
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }
  std::string prefix() const { return path_.empty() ? "" : path_ + "."; }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

/// Module validators phrase errors as "<field> <problem>".
template <typename F>
void check_section(const std::string& section, F&& validate) {
  try {
    validate();
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    const auto space = msg.find(' ');
    if (space == std::string::npos) throw ConfigError(section + ": " + msg);
    throw ConfigError(section + "." + msg.substr(0, space) + ":" + msg.substr(space));
  }
}

void read_sim(Section s, sim::SimConfig& c) {
  s.get("base_service_s", c.base_service_s)
      .get("service_jitter_s", c.service_jitter_s)
      .get("pod_startup_delay_s", c.pod_startup_delay_s)
      .get("request_timeout_s", c.request_timeout_s)
      .get("failure_probability", c.failure_probability)
      .get("cache_hit_probability", c.cache_hit_probability)
      .get("cache_hit_service_s", c.cache_hit_service_s)
      .get("max_replicas", c.max_replicas)
      .get("cooldown_window_s", c.cooldown_window_s)
      .finish();
}

void read_env(Section s, env::EnvConfig& c) {
  s.get("stress_interval", c.stress_interval)
      .get("soft_pod_threshold", c.soft_pod_threshold)
      .get("pod_cost", c.pod_cost)
      .get("stress_fail_weight", c.stress_fail_weight)
      .get("stress_latency_weight", c.stress_latency_weight)
      .get("latency_threshold_s", c.latency_threshold_s)
      .get("heal_penalty", c.heal_penalty)
      .get("t_cap", c.t_cap)
      .get("p_cap", c.p_cap)
      .get("steps_per_episode", c.steps_per_episode)
      .get("recovery_cap", c.recovery_cap)
      .get("settle_margin_s", c.settle_margin_s)
      .get("initial_replicas", c.initial_replicas)
      .finish();
}

void read_ppo(Section s, ExperimentConfig& c) {
  auto& p = c.ppo;
  s.get("clip_epsilon", p.clip_epsilon)
      .get("gamma", p.gamma)
      .get("gae_lambda", p.gae_lambda)
      .get("learning_rate", p.learning_rate)
      .get("epochs", p.epochs)
      .get("minibatch_size", p.minibatch_size)
      .get("entropy_coef", p.entropy_coef)
      .get("value_coef", p.value_coef)
      .get("max_grad_norm", p.max_grad_norm)
      .get("rollout_length", p.rollout_length)
      .get("normalize_advantages", p.normalize_advantages)
      .get("hidden", c.layout.hidden)
      .get("policy_head_scale", c.policy_head_scale)
      .finish();
}

void read_fhe(Section s, FheSettings& f) {
  s.get("bits", f.bits)
      .get("inferences", f.inferences)
      .get("input_lo", f.input_lo)
      .get("input_hi", f.input_hi)
      .get("activation", f.activation)
      .get("activation_degree", f.activation_degree)
      .get("bootstrapping", f.bootstrapping)
      .get("train_epochs", f.train_epochs)
      .get("train_learning_rate", f.train_learning_rate)
      .get("base_cost_s", f.base_cost_s)
      .get("cost_per_mul_s", f.cost_per_mul_s)
      .get("cost_per_bootstrap_s", f.cost_per_bootstrap_s)
      .finish();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (episodes < 0) throw ConfigError("episodes: must be >= 0");
  if (eval_episodes < 0) throw ConfigError("eval_episodes: must be >= 0");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
  check_section("sim", [&] { env.cluster.validate(); });
  check_section("env", [&] { env.validate(); });
  check_section("ppo", [&] { ppo.validate(); });
  if (layout.hidden.empty()) throw ConfigError("ppo.hidden: need at least one layer");
  for (int h : layout.hidden)
    if (h < 1) throw ConfigError("ppo.hidden: layer sizes must be >= 1");
  if (!(policy_head_scale >= 0.0)) throw ConfigError("ppo.policy_head_scale: must be >= 0");
  if (fhe.bits < 2 || fhe.bits > 24) throw ConfigError("fhe.bits: must be in [2, 24]");
  if (fhe.inferences < 0) throw ConfigError("fhe.inferences: must be >= 0");
  if (!(fhe.input_lo < fhe.input_hi)) throw ConfigError("fhe.input_lo: must be below input_hi");
  if (fhe.activation_degree < 1) throw ConfigError("fhe.activation_degree: must be >= 1");
  if (fhe.train_epochs < 1) throw ConfigError("fhe.train_epochs: must be >= 1");
  if (!(fhe.train_learning_rate > 0.0)) throw ConfigError("fhe.train_learning_rate: must be positive");
  if (fhe.base_cost_s < 0 || fhe.cost_per_mul_s < 0 || fhe.cost_per_bootstrap_s < 0)
    throw ConfigError("fhe.base_cost_s: simulated costs must be >= 0");
  if (data.synthetic_users < 1) throw ConfigError("data.synthetic_users: must be >= 1");
}

ExperimentConfig preset_config(std::string_view name) {
  ExperimentConfig c;
  c.preset = std::string(name);
  // Calibrated so that the reward optimum sits at 3-5 replicas.
  c.env.cluster.base_service_s = 1.2;
  c.env.stress_interval = 2;
  c.ppo.learning_rate = 5e-3;
  c.ppo.rollout_length = 50;
  c.ppo.minibatch_size = 25;
  c.ppo.gamma = 0.5;
  if (name == "default") return c;
  if (name == "diagnostic") {
    c.env.cluster.service_jitter_s = 0.0;
    c.env.cluster.failure_probability = 0.0;
    c.env.stress_interval = 1;
    c.env.soft_pod_threshold = 4;
    c.env.steps_per_episode = 100;
    c.ppo.learning_rate = 2e-3;
    c.ppo.rollout_length = 200;
    c.ppo.minibatch_size = 64;
    return c;
  }
  throw ConfigError("preset: unknown preset '" + std::string(name) + "' (default, diagnostic)");
}

ExperimentConfig parse_config(const json& doc) {
  Section root(doc, "");
  std::string preset = "default";
  root.get("preset", preset);
  ExperimentConfig c = preset_config(preset);
  root.get("seed", c.seed)
      .get("episodes", c.episodes)
      .get("eval_episodes", c.eval_episodes)
      .get("output_dir", c.output_dir);
  if (const auto* j = root.child("sim")) read_sim(Section(*j, "sim"), c.env.cluster);
  if (const auto* j = root.child("env")) read_env(Section(*j, "env"), c.env);
  if (const auto* j = root.child("ppo")) read_ppo(Section(*j, "ppo"), c);
  if (const auto* j = root.child("fhe")) read_fhe(Section(*j, "fhe"), c.fhe);
  if (const auto* j = root.child("data")) Section(*j, "data").get("synthetic_users", c.data.synthetic_users).finish();
  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& c) {
  const auto& s = c.env.cluster;
  const auto& e = c.env;
  const auto& p = c.ppo;
  const auto& f = c.fhe;
  json j;
  j["preset"] = c.preset;
  j["seed"] = c.seed;
  j["episodes"] = c.episodes;
  j["eval_episodes"] = c.eval_episodes;
  j["output_dir"] = c.output_dir;
  j["sim"] = {{"base_service_s", s.base_service_s},
              {"service_jitter_s", s.service_jitter_s},
              {"pod_startup_delay_s", s.pod_startup_delay_s},
              {"request_timeout_s", s.request_timeout_s},
              {"failure_probability", s.failure_probability},
              {"cache_hit_probability", s.cache_hit_probability},
              {"cache_hit_service_s", s.cache_hit_service_s},
              {"max_replicas", s.max_replicas},
              {"cooldown_window_s", s.cooldown_window_s}};
  j["env"] = {{"stress_interval", e.stress_interval},
              {"soft_pod_threshold", e.soft_pod_threshold},
              {"pod_cost", e.pod_cost},
              {"stress_fail_weight", e.stress_fail_weight},
              {"stress_latency_weight", e.stress_latency_weight},
              {"latency_threshold_s", e.latency_threshold_s},
              {"heal_penalty", e.heal_penalty},
              {"t_cap", e.t_cap},
              {"p_cap", e.p_cap},
              {"steps_per_episode", e.steps_per_episode},
              {"recovery_cap", e.recovery_cap},
              {"settle_margin_s", e.settle_margin_s},
              {"initial_replicas", e.initial_replicas}};
  j["ppo"] = {{"clip_epsilon", p.clip_epsilon},
              {"gamma", p.gamma},
              {"gae_lambda", p.gae_lambda},
              {"learning_rate", p.learning_rate},
              {"epochs", p.epochs},
              {"minibatch_size", p.minibatch_size},
              {"entropy_coef", p.entropy_coef},
              {"value_coef", p.value_coef},
              {"max_grad_norm", p.max_grad_norm},
              {"rollout_length", p.rollout_length},
              {"normalize_advantages", p.normalize_advantages},
              {"hidden", c.layout.hidden},
              {"policy_head_scale", c.policy_head_scale}};
  j["fhe"] = {{"bits", f.bits},
              {"inferences", f.inferences},
              {"input_lo", f.input_lo},
              {"input_hi", f.input_hi},
              {"activation", f.activation},
              {"activation_degree", f.activation_degree},
              {"bootstrapping", f.bootstrapping},
              {"train_epochs", f.train_epochs},
              {"train_learning_rate", f.train_learning_rate},
              {"base_cost_s", f.base_cost_s},
              {"cost_per_mul_s", f.cost_per_mul_s},
              {"cost_per_bootstrap_s", f.cost_per_bootstrap_s}};
  j["data"] = {{"synthetic_users", c.data.synthetic_users}};
  return j;
}

}  // namespace fhescale::harness
