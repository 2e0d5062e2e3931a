#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "fhescale/fhe/model.hpp"

namespace fhescale::data {

inline constexpr std::size_t kPoolSize = 50;
inline constexpr std::size_t kFeatureCount = kPoolSize - 1;
inline constexpr double kPositiveThreshold = 4.0;

struct Rating {
  std::int64_t user = 0;
  std::int64_t item = 0;
  double rating = 0.0;  // in [0.5, 5]
  std::int64_t timestamp = 0;

  bool operator==(const Rating&) const = default;
};

using RatingsTable = std::vector<Rating>;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// MovieLens 100K `u.data` layout: `user<TAB>item<TAB>rating<TAB>timestamp`.
/// Blank lines are skipped; anything else malformed throws ParseError with
/// the 1-based line number. Duplicate (user, item, timestamp) rows are
/// rejected.
RatingsTable parse_ratings(std::istream& in);
RatingsTable read_ratings_file(const std::filesystem::path& path);

/// Inverse of parse_ratings (shortest round-trip rating formatting).
void write_ratings(const RatingsTable& table, std::ostream& out);

/// Recommendation samples over a pool of 50 films.
///
/// Row i has 49 features: the user's mean-centered ratings of every pool film
/// except films[labels[i]], in pool order, 0 where unrated. The mean is taken
/// over all of the user's ratings in the table; repeated ratings of one item
/// keep the latest timestamp.
struct Dataset {
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::int64_t> films;  // pool item ids, by descending rating count
  std::vector<std::int64_t> users;  // user id of each sample

  std::size_t n_samples() const { return labels.size(); }
  fhe::LabeledMatrix view() const { return {features, labels, kFeatureCount, kPoolSize}; }
  std::int64_t feature_film(std::size_t sample, std::size_t column) const;

  bool operator==(const Dataset&) const = default;
};

/// The 50 most-rated items; ties go to the lower item id. Throws
/// std::invalid_argument when fewer than 50 distinct items exist.
std::vector<std::int64_t> select_pool(const RatingsTable& table);

/// One sample per (user, pool film rated >= 4), users ascending, films in
/// pool order.
Dataset build_dataset(const RatingsTable& table);

/// Synthetic ratings with planted taste clusters.
///
/// Items 1..60 exist. Users 1..n_users belong to cluster (user-1) % 5 and
/// cluster k favours items 10k+1..10k+10: each favourite is rated 4 or 5 with
/// probability 0.8 (at least one is always rated), every other item in 1..50
/// is rated 1-3 with probability 0.15, and the niche items 51..60 with
/// probability 0.02. A catalog row from user 0 rates all 60 items at 3 so the
/// pool is always full; its ratings are below the positive threshold and never
/// produce samples.
RatingsTable synth_ratings(std::uint64_t seed, std::size_t n_users);
Dataset synth_dataset(std::uint64_t seed, std::size_t n_users);

/// Text artifact: a header line, the pool ids, then one tab-separated row per
/// sample (`user label f0 .. f48`). Deterministic byte-for-byte.
void write_dataset(const Dataset& dataset, std::ostream& out);
Dataset read_dataset(std::istream& in);

}  // namespace fhescale::data
