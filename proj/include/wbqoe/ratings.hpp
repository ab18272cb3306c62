#pragma once

#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "wbqoe/error.hpp"
#include "wbqoe/types.hpp"

namespace wbqoe {

/// Validated ACR ratings. Out-of-range scores and repeated
/// (pair, participant, condition, dimension) submissions are errors.
class RatingStore {
 public:
  void add(const RatingRecord& r) {
    if (r.score < 1 || r.score > 5) throw Error(Errc::InvalidRating, "score outside 1-5");
    if (r.pair_id.empty() || r.participant_id.empty()) throw Error(Errc::InvalidRating, "empty identifier");
    std::lock_guard lock(mu_);
    auto key = std::make_tuple(r.pair_id, r.participant_id, r.condition, r.dimension);
    if (!keys_.insert(key).second) throw Error(Errc::DuplicateRating, "rating already submitted");
    records_.push_back(r);
  }

  std::size_t count(const std::string& pair_id, const Condition& c) const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& r : records_) n += (r.pair_id == pair_id && r.condition == c) ? 1 : 0;
    return n;
  }

  std::vector<RatingRecord> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<RatingRecord> records_;
  std::set<std::tuple<std::string, std::string, Condition, Dimension>> keys_;
};

// ---------------------------------------------------------------------------
// Ratings CSV:
//   pair_id,participant_id,platform,mode,latency_ms,dimension,score,t_submitted,status
// status is "ok" for a rating row, "aborted" for a placeholder row of an
// aborted condition (dimension, score and t_submitted empty).

inline constexpr const char* kRatingsCsvHeader =
    "pair_id,participant_id,platform,mode,latency_ms,dimension,score,t_submitted,status";

namespace csv {

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace csv

inline std::string rating_csv_row(const RatingRecord& r) {
  std::ostringstream os;
  os << csv::quote(r.pair_id) << ',' << csv::quote(r.participant_id) << ',' << token(r.condition.platform)
     << ',' << token(r.condition.mode) << ',' << r.condition.latency_ms << ',' << token(r.dimension) << ','
     << r.score << ',' << csv::fixed3(to_ms(r.t_submitted)) << ",ok";
  return os.str();
}

inline std::string aborted_csv_row(const std::string& pair_id, const std::string& participant,
                                   const Condition& c) {
  std::ostringstream os;
  os << csv::quote(pair_id) << ',' << csv::quote(participant) << ',' << token(c.platform) << ','
     << token(c.mode) << ',' << c.latency_ms << ",,,,aborted";
  return os.str();
}

struct RatingsFile {
  std::vector<RatingRecord> ratings;
  std::size_t aborted_rows = 0;
};

inline RatingsFile parse_ratings_csv(std::istream& in) {
  RatingsFile out;
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::StorageFailure, "empty ratings file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRatingsCsvHeader) throw Error(Errc::StorageFailure, "unexpected ratings header");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = csv::split_line(line);
    auto bad = [&](const std::string& m) {
      throw Error(Errc::InvalidRating, "line " + std::to_string(lineno) + ": " + m);
    };
    if (f.size() != 9) bad("expected 9 columns");
    if (f[8] == "aborted") {
      ++out.aborted_rows;
      continue;
    }
    if (f[8] != "ok") bad("unknown status");
    RatingRecord r;
    r.pair_id = f[0];
    r.participant_id = f[1];
    auto platform = parse_Platform(f[2]);
    auto mode = parse_Mode(f[3]);
    auto dim = parse_Dimension(f[5]);
    if (!platform || !mode || !dim) bad("unknown enumeration value");
    r.condition = {*platform, *mode, 0};
    try {
      r.condition.latency_ms = std::stoll(f[4]);
      r.score = std::stoi(f[6]);
      r.t_submitted = from_ms_real(std::stod(f[7]));
    } catch (const std::exception&) {
      bad("non-numeric field");
    }
    r.dimension = *dim;
    if (r.score < 1 || r.score > 5) bad("score outside 1-5");
    out.ratings.push_back(std::move(r));
  }
  return out;
}

inline RatingsFile load_ratings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::StorageFailure, "cannot open " + path);
  return parse_ratings_csv(in);
}

}  // namespace wbqoe
