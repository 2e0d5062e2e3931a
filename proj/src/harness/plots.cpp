#include "fhescale/harness/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <fmt/format.h>

namespace fhescale::harness {

namespace {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;

struct Axis {
  double lo, hi, step;
};

Axis nice_axis(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (raw <= step) break;
  }
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step, step};
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::string tick_label(double v, double step) {
  const int decimals = step >= 1.0 ? 0 : static_cast<int>(std::ceil(-std::log10(step)));
  if (std::abs(v) < step * 1e-9) v = 0.0;
  return fmt::format("{:.{}f}", v, decimals);
}

}  // namespace

std::string render_svg(const Chart& chart) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : chart.series) {
    for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
    for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  const Axis ax = nice_axis(x0, x1), ay = nice_axis(y0, y1);
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (v - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double v) { return kTop + (ay.hi - v) / (ay.hi - ay.lo) * ph; };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{3}</text>\n",
      kW, kH, kLeft + pw / 2, escape(chart.title));

  for (double v = ax.lo; v <= ax.hi + ax.step * 1e-9; v += ax.step)
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#e5e5e5\"/>"
        "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\">{4}</text>\n",
        px(v), kTop, kTop + ph, kTop + ph + 16, tick_label(v, ax.step));
  for (double v = ay.lo; v <= ay.hi + ay.step * 1e-9; v += ay.step)
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#e5e5e5\"/>"
        "<text x=\"{3:.2f}\" y=\"{4:.2f}\" text-anchor=\"end\">{5}</text>\n",
        kLeft, py(v), kLeft + pw, kLeft - 6, py(v) + 4, tick_label(v, ay.step));
  svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                     kLeft, kTop, pw, ph);
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", kLeft + pw / 2,
                     kH - 12, escape(chart.x_label));
  svg += fmt::format(
      "<text x=\"16\" y=\"{0:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.2f})\">{1}</text>\n",
      kTop + ph / 2, escape(chart.y_label));

  double legend_y = kTop + 10;
  for (const auto& s : chart.series) {
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      pts += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", px(s.x[i]), py(s.y[i]));
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n", s.color, pts);
    if (s.markers)
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
        svg += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3.5\" fill=\"{}\"/>\n", px(s.x[i]), py(s.y[i]),
                           s.color);
    svg += fmt::format(
        "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"{3}\" stroke-width=\"2\"/>"
        "<text x=\"{4:.2f}\" y=\"{5:.2f}\">{6}</text>\n",
        kLeft + pw + 10, legend_y, kLeft + pw + 30, s.color, kLeft + pw + 36, legend_y + 4, escape(s.label));
    legend_y += 18;
  }
  svg += "</svg>\n";
  return svg;
}

namespace {

Chart per_episode(const std::vector<EpisodeRow>& eps, const char* title, const char* y_label,
                  double EpisodeRow::*field, const char* color) {
  Series s{y_label, color, {}, {}, false};
  for (const auto& e : eps) {
    s.x.push_back(e.episode);
    s.y.push_back(e.*field);
  }
  return {title, "episode", y_label, {s}};
}

}  // namespace

Chart replica_selection_chart(const std::vector<EpisodeRow>& episodes) {
  std::map<long, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& e : episodes) {
    auto& g = groups[std::lround(e.mean_replicas)];
    g.first.push_back(e.mean_reward);
    g.second.push_back(e.mean_latency_s);
  }
  Series reward{"mean reward", "#1f77b4", {}, {}, true};
  Series latency{"mean latency (s)", "#d62728", {}, {}, true};
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  for (const auto& [replicas, g] : groups) {
    reward.x.push_back(static_cast<double>(replicas));
    reward.y.push_back(mean(g.first));
    latency.x.push_back(static_cast<double>(replicas));
    latency.y.push_back(mean(g.second));
  }
  return {"Replica Selection", "mean replicas (rounded)", "value", {reward, latency}};
}

Chart reward_chart(const std::vector<EpisodeRow>& e) {
  return per_episode(e, "Reward Per Episode", "mean reward", &EpisodeRow::mean_reward, "#1f77b4");
}

Chart latency_chart(const std::vector<EpisodeRow>& e) {
  return per_episode(e, "Latency Per Episode", "mean latency (s)", &EpisodeRow::mean_latency_s, "#d62728");
}

Chart replicas_chart(const std::vector<EpisodeRow>& e) {
  auto c = per_episode(e, "Replicas Per Episode", "mean replicas", &EpisodeRow::mean_replicas, "#2ca02c");
  Series pods{"mean pods", "#ff7f0e", {}, {}, false};
  for (const auto& r : e) {
    pods.x.push_back(r.episode);
    pods.y.push_back(r.mean_pods);
  }
  c.series.push_back(pods);
  return c;
}

std::vector<std::filesystem::path> write_figures(const std::vector<EpisodeRow>& episodes,
                                                 const std::filesystem::path& dir) {
  const std::pair<const char*, Chart> figures[] = {
      {"replica_selection.svg", replica_selection_chart(episodes)},
      {"reward_per_episode.svg", reward_chart(episodes)},
      {"latency_per_episode.svg", latency_chart(episodes)},
      {"replicas_per_episode.svg", replicas_chart(episodes)},
  };
  std::vector<std::filesystem::path> written;
  for (const auto& [name, chart] : figures) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << render_svg(chart);
    written.push_back(path);
  }
  return written;
}

}  // namespace fhescale::harness
