#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "fhescale/harness/training.hpp"

namespace fhescale::harness {

inline constexpr std::string_view kStepHeader =
    "episode,step,action,response_time_s,pod_count,replica_target,reward_base,penalty_stress,"
    "penalty_resource,heal_penalty,reward_total";
inline constexpr std::string_view kEpisodeHeader =
    "episode,steps,mean_reward,mean_latency_s,mean_replicas,mean_pods,stress_failures";

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reals are written with 6 decimals.
void write_step_csv(const std::vector<StepRow>& rows, std::ostream& out);
void write_episode_csv(const std::vector<EpisodeRow>& rows, std::ostream& out);
void write_step_csv(const std::vector<StepRow>& rows, const std::filesystem::path& path);
void write_episode_csv(const std::vector<EpisodeRow>& rows, const std::filesystem::path& path);

/// Requires the exact header; throws CsvError with the line number.
std::vector<EpisodeRow> read_episode_csv(std::istream& in);
std::vector<EpisodeRow> read_episode_csv(const std::filesystem::path& path);

}  // namespace fhescale::harness
