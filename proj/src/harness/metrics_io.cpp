#include "fhescale/harness/metrics_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

namespace fhescale::harness {

void write_step_csv(const std::vector<StepRow>& rows, std::ostream& out) {
  out << kStepHeader << '\n';
  for (const auto& r : rows)
    fmt::print(out, "{},{},{},{:.6f},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.episode, r.step, r.action,
               r.response_time_s, r.pod_count, r.replica_target, r.reward_base, r.penalty_stress,
               r.penalty_resource, r.heal_penalty, r.reward_total);
}

void write_episode_csv(const std::vector<EpisodeRow>& rows, std::ostream& out) {
  out << kEpisodeHeader << '\n';
  for (const auto& r : rows)
    fmt::print(out, "{},{},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", r.episode, r.steps, r.mean_reward,
               r.mean_latency_s, r.mean_replicas, r.mean_pods, r.stress_failures);
}

namespace {

template <typename Rows, typename Writer>
void write_file(const Rows& rows, const std::filesystem::path& path, Writer w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CsvError("cannot write " + path.string());
  w(rows, out);
  if (!out) throw CsvError("write failed: " + path.string());
}

template <typename T>
T parse_field(std::string_view s, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw CsvError("line " + std::to_string(line) + ": bad field '" + std::string(s) + "'");
  return v;
}

}  // namespace

void write_step_csv(const std::vector<StepRow>& rows, const std::filesystem::path& path) {
  write_file(rows, path, [](const auto& r, std::ostream& o) { write_step_csv(r, o); });
}

void write_episode_csv(const std::vector<EpisodeRow>& rows, const std::filesystem::path& path) {
  write_file(rows, path, [](const auto& r, std::ostream& o) { write_episode_csv(r, o); });
}

std::vector<EpisodeRow> read_episode_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kEpisodeHeader) throw CsvError("line 1: unexpected header");
  std::vector<EpisodeRow> rows;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (auto comma = rest.find(','); comma != std::string_view::npos; comma = rest.find(',')) {
      f.push_back(rest.substr(0, comma));
      rest.remove_prefix(comma + 1);
    }
    f.push_back(rest);
    if (f.size() != 7) throw CsvError("line " + std::to_string(n) + ": expected 7 fields");
    EpisodeRow r;
    r.episode = parse_field<int>(f[0], n);
    r.steps = parse_field<int>(f[1], n);
    r.mean_reward = parse_field<double>(f[2], n);
    r.mean_latency_s = parse_field<double>(f[3], n);
    r.mean_replicas = parse_field<double>(f[4], n);
    r.mean_pods = parse_field<double>(f[5], n);
    r.stress_failures = parse_field<int>(f[6], n);
    rows.push_back(r);
  }
  return rows;
}

std::vector<EpisodeRow> read_episode_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open " + path.string());
  return read_episode_csv(in);
}

}  // namespace fhescale::harness
