#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fhescale/harness/training.hpp"

namespace fhescale::harness {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x, y;
  bool markers = false;
};

struct Chart {
  std::string title, x_label, y_label;
  std::vector<Series> series;
};

std::string render_svg(const Chart& chart);

/// Mean reward and mean latency per group of episodes with the same rounded
/// mean replica count.
Chart replica_selection_chart(const std::vector<EpisodeRow>& episodes);
Chart reward_chart(const std::vector<EpisodeRow>& episodes);
Chart latency_chart(const std::vector<EpisodeRow>& episodes);
Chart replicas_chart(const std::vector<EpisodeRow>& episodes);

/// Writes replica_selection.svg, reward_per_episode.svg,
/// latency_per_episode.svg and replicas_per_episode.svg into dir.
std::vector<std::filesystem::path> write_figures(const std::vector<EpisodeRow>& episodes,
                                                 const std::filesystem::path& dir);

}  // namespace fhescale::harness
