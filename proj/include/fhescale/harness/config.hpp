#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "fhescale/env/scaling_env.hpp"
#include "fhescale/ppo/policy_net.hpp"
#include "fhescale/ppo/ppo.hpp"

namespace fhescale::harness {

/// Invalid configuration; what() starts with the dotted field path.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSettings {
  int synthetic_users = 500;
};

struct FheSettings {
  int bits = 8;
  int inferences = 1000;
  double input_lo = -4.5;
  double input_hi = 4.5;
  bool activation = false;
  int activation_degree = 7;
  bool bootstrapping = true;
  int train_epochs = 50;
  double train_learning_rate = 0.5;
  // Simulated server cost per inference.
  double base_cost_s = 0.05;
  double cost_per_mul_s = 0.002;
  double cost_per_bootstrap_s = 0.25;
};

struct ExperimentConfig {
  std::string preset = "default";
  std::uint64_t seed = 1;
  int episodes = 100;
  int eval_episodes = 10;
  std::string output_dir = "out";
  env::EnvConfig env;  // env.cluster holds the simulator section
  ppo::PPOConfig ppo;
  ppo::NetLayout layout;
  double policy_head_scale = 0.01;
  FheSettings fhe;
  DataSettings data;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// "default" (calibrated reproduction run) or "diagnostic" (stationary
/// environment whose best policy holds 4 replicas).
ExperimentConfig preset_config(std::string_view name);

/// Starts from the preset named by the "preset" key, then overlays every
/// given field. Unknown keys and wrong types are errors.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Complete document; parse_config(to_json(c)) == c field-for-field.
nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace fhescale::harness
