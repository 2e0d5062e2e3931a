#include "fhescale/data/movielens.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>
#include <tuple>
#include <unordered_map>

#include "fhescale/common/random.hpp"

namespace fhescale::data {

namespace {

template <typename T>
bool parse_number(std::string_view text, T& out) {
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

RatingsTable parse_ratings(std::istream& in) {
  RatingsTable table;
  std::set<std::tuple<std::int64_t, std::int64_t, std::int64_t>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 tab-separated fields, found " + std::to_string(fields.size()));
    }
    Rating r;
    if (!parse_number(fields[0], r.user)) throw ParseError(line_no, "bad user id");
    if (!parse_number(fields[1], r.item)) throw ParseError(line_no, "bad item id");
    if (!parse_number(fields[2], r.rating)) throw ParseError(line_no, "bad rating");
    if (!parse_number(fields[3], r.timestamp)) throw ParseError(line_no, "bad timestamp");
    if (r.user < 0 || r.item < 0) throw ParseError(line_no, "ids must be non-negative");
    if (!(r.rating >= 0.5 && r.rating <= 5.0)) throw ParseError(line_no, "rating outside [0.5, 5]");
    if (!seen.emplace(r.user, r.item, r.timestamp).second) {
      throw ParseError(line_no, "duplicate (user, item, timestamp) row");
    }
    table.push_back(r);
  }
  return table;
}

RatingsTable read_ratings_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open ratings file " + path.string());
  return parse_ratings(in);
}

void write_ratings(const RatingsTable& table, std::ostream& out) {
  for (const auto& r : table) {
    out << r.user << '\t' << r.item << '\t' << format_double(r.rating) << '\t' << r.timestamp << '\n';
  }
}

std::vector<std::int64_t> select_pool(const RatingsTable& table) {
  std::map<std::int64_t, std::size_t> counts;
  for (const auto& r : table) ++counts[r.item];
  if (counts.size() < kPoolSize) {
    throw std::invalid_argument("need at least " + std::to_string(kPoolSize) + " distinct items, found " +
                                std::to_string(counts.size()));
  }
  std::vector<std::pair<std::int64_t, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::int64_t> pool;
  for (std::size_t i = 0; i < kPoolSize; ++i) pool.push_back(ranked[i].first);
  return pool;
}

std::int64_t Dataset::feature_film(std::size_t sample, std::size_t column) const {
  const auto label = static_cast<std::size_t>(labels[sample]);
  return films[column < label ? column : column + 1];
}

Dataset build_dataset(const RatingsTable& table) {
  Dataset ds;
  ds.films = select_pool(table);
  std::unordered_map<std::int64_t, std::size_t> pool_index;
  for (std::size_t i = 0; i < ds.films.size(); ++i) pool_index[ds.films[i]] = i;

  struct UserData {
    double sum = 0.0;
    std::size_t count = 0;
    // pool index -> (timestamp, rating) of the latest rating
    std::map<std::size_t, std::pair<std::int64_t, double>> pool_ratings;
  };
  std::map<std::int64_t, UserData> users;
  for (const auto& r : table) {
    auto& u = users[r.user];
    u.sum += r.rating;
    ++u.count;
    const auto it = pool_index.find(r.item);
    if (it == pool_index.end()) continue;
    auto [slot, inserted] = u.pool_ratings.try_emplace(it->second, r.timestamp, r.rating);
    if (!inserted && r.timestamp >= slot->second.first) slot->second = {r.timestamp, r.rating};
  }

  std::vector<double> centered(kPoolSize);
  for (const auto& [user, u] : users) {
    const double mean = u.sum / static_cast<double>(u.count);
    std::fill(centered.begin(), centered.end(), 0.0);
    for (const auto& [idx, rated] : u.pool_ratings) centered[idx] = rated.second - mean;
    for (const auto& [idx, rated] : u.pool_ratings) {
      if (rated.second < kPositiveThreshold) continue;
      ds.labels.push_back(static_cast<int>(idx));
      ds.users.push_back(user);
      for (std::size_t j = 0; j < kPoolSize; ++j) {
        if (j != idx) ds.features.push_back(centered[j]);
      }
    }
  }
  return ds;
}

RatingsTable synth_ratings(std::uint64_t seed, std::size_t n_users) {
  constexpr int kClusters = 5;
  constexpr int kItems = 60;
  Rng rng(seed);
  RatingsTable table;
  std::int64_t clock = 880000000;
  for (int item = 1; item <= kItems; ++item) table.push_back({0, item, 3.0, clock++});

  for (std::size_t n = 1; n <= n_users; ++n) {
    const auto user = static_cast<std::int64_t>(n);
    const int cluster = static_cast<int>((n - 1) % kClusters);
    const int fav_lo = 10 * cluster + 1;
    const int fav_hi = fav_lo + 9;
    bool any_favourite = false;
    for (int item = 1; item <= kItems; ++item) {
      const bool favourite = item >= fav_lo && item <= fav_hi;
      double rating = 0.0;
      if (favourite) {
        if (bernoulli(rng, 0.8)) rating = static_cast<double>(uniform_int(rng, 4, 5));
      } else if (item <= 50) {
        if (bernoulli(rng, 0.15)) rating = static_cast<double>(uniform_int(rng, 1, 3));
      } else if (bernoulli(rng, 0.02)) {
        rating = static_cast<double>(uniform_int(rng, 1, 5));
      }
      if (rating == 0.0 && favourite && item == fav_hi && !any_favourite) {
        rating = static_cast<double>(uniform_int(rng, 4, 5));
      }
      if (rating == 0.0) continue;
      any_favourite |= favourite;
      table.push_back({user, item, rating, clock++});
    }
  }
  return table;
}

Dataset synth_dataset(std::uint64_t seed, std::size_t n_users) {
  if (n_users == 0) throw std::invalid_argument("synthetic dataset needs at least one user");
  return build_dataset(synth_ratings(seed, n_users));
}

void write_dataset(const Dataset& ds, std::ostream& out) {
  out << "# fhescale-dataset v1 samples=" << ds.n_samples() << " features=" << kFeatureCount << '\n';
  out << "films";
  for (auto f : ds.films) out << '\t' << f;
  out << '\n';
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    out << ds.users[i] << '\t' << ds.labels[i];
    for (std::size_t j = 0; j < kFeatureCount; ++j) out << '\t' << format_double(ds.features[i * kFeatureCount + j]);
    out << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line.rfind("# fhescale-dataset v1", 0) != 0) {
    throw ParseError(1, "missing dataset header");
  }
  ++line_no;
  if (!std::getline(in, line)) throw ParseError(2, "missing film list");
  ++line_no;
  {
    const auto fields = split(line, '\t');
    if (fields.size() != kPoolSize + 1 || fields[0] != "films") throw ParseError(2, "bad film list");
    for (std::size_t i = 1; i < fields.size(); ++i) {
      std::int64_t id = 0;
      if (!parse_number(fields[i], id)) throw ParseError(2, "bad film id");
      ds.films.push_back(id);
    }
  }
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != kFeatureCount + 2) throw ParseError(line_no, "wrong number of columns");
    std::int64_t user = 0;
    int label = 0;
    if (!parse_number(fields[0], user) || !parse_number(fields[1], label) || label < 0 ||
        static_cast<std::size_t>(label) >= kPoolSize) {
      throw ParseError(line_no, "bad user or label");
    }
    ds.users.push_back(user);
    ds.labels.push_back(label);
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      double v = 0.0;
      if (!parse_number(fields[j + 2], v)) throw ParseError(line_no, "bad feature value");
      ds.features.push_back(v);
    }
  }
  return ds;
}

}  // namespace fhescale::data
