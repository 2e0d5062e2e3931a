#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

#include "fhescale/harness/config.hpp"

namespace fhescale::harness {

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // runtime failure (parse error, noise overflow, ...)
inline constexpr int kExitUsage = 2;    // invalid config or arguments

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
};

/// Loads the config (or the default preset) and applies --seed / --out.
ExperimentConfig resolve_config(const CommonOptions& common);

struct DataOptions {
  std::optional<std::filesystem::path> input;  // ratings file; synthetic when absent
  std::optional<int> users;
};

struct FheDemoOptions {
  std::optional<std::filesystem::path> dataset;  // synthetic when absent
  std::optional<int> bits;
  std::optional<int> inferences;
  std::optional<int> degree;
  bool activation = false;
  bool no_bootstrap = false;
};

struct EvalOptions {
  std::optional<std::filesystem::path> checkpoint;  // default <out>/policy.bin
  std::optional<int> episodes;
};

struct PlotOptions {
  std::optional<std::filesystem::path> input_dir;  // default <out>
};

/// Writes <out>/dataset.txt and prints a summary.
int cmd_data(const CommonOptions& common, const DataOptions& opts, std::ostream& out, std::ostream& err);

/// Train, compile, encrypt/evaluate/decrypt; writes <out>/fhe_demo.csv.
int cmd_fhe_demo(const CommonOptions& common, const FheDemoOptions& opts, std::ostream& out, std::ostream& err);

/// Writes step_metrics.csv, episode_metrics.csv, policy.bin, config.json and
/// the four figures into <out>.
int cmd_train(const CommonOptions& common, std::ostream& out, std::ostream& err);

/// Greedy rollouts; writes eval_step_metrics.csv and eval_episode_metrics.csv.
int cmd_eval(const CommonOptions& common, const EvalOptions& opts, std::ostream& out, std::ostream& err);

/// Redraws the figures from <input_dir>/episode_metrics.csv into <out>.
int cmd_plot(const CommonOptions& common, const PlotOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace fhescale::harness
