#pragma once

// Tables computed from collected ratings. Each table maps to one `analyze`
// statistic and is written as CSV.

#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "wbqoe/error.hpp"
#include "wbqoe/ratings.hpp"
#include "wbqoe/stats.hpp"
#include "wbqoe/types.hpp"

namespace wbqoe {

enum class GroupField { Platform, Mode, Latency };

struct GroupBy {
  bool platform = false;
  bool mode = false;
  bool latency = false;

  static GroupBy parse(const std::string& spec) {
    GroupBy g;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (part == "platform") g.platform = true;
      else if (part == "mode") g.mode = true;
      else if (part == "latency") g.latency = true;
      else if (!part.empty()) throw Error(Errc::InvalidConfig, "unknown group-by field '" + part + "'");
    }
    return g;
  }

  GroupBy without_latency() const { return {platform, mode, false}; }
};

struct GroupKey {
  std::optional<Platform> platform;
  std::optional<Mode> mode;
  std::optional<std::int64_t> latency_ms;

  static GroupKey of(const Condition& c, const GroupBy& g) {
    GroupKey k;
    if (g.platform) k.platform = c.platform;
    if (g.mode) k.mode = c.mode;
    if (g.latency) k.latency_ms = c.latency_ms;
    return k;
  }
  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
};

namespace detail {

inline std::string header_for(const GroupBy& g) {
  std::string h;
  if (g.platform) h += "platform,";
  if (g.mode) h += "mode,";
  if (g.latency) h += "latency_ms,";
  return h;
}

inline std::string cells_for(const GroupKey& k, const GroupBy& g) {
  std::string s;
  if (g.platform) s += std::string(token(*k.platform)) + ",";
  if (g.mode) s += std::string(token(*k.mode)) + ",";
  if (g.latency) s += std::to_string(*k.latency_ms) + ",";
  return s;
}

using Cell = std::pair<GroupKey, Dimension>;

inline std::map<Cell, std::vector<double>> bucket(std::span<const RatingRecord> ratings, const GroupBy& g) {
  std::map<Cell, std::vector<double>> out;
  for (const auto& r : ratings) out[{GroupKey::of(r.condition, g), r.dimension}].push_back(r.score);
  return out;
}

}  // namespace detail

struct MosRow {
  GroupKey key;
  Dimension dimension;
  stats::MosResult mos;
};

/// One MOS per (group, dimension); empty groups are absent. Ordered by
/// platform, mode, latency ascending, then the fixed dimension order.
inline std::vector<MosRow> aggregate(std::span<const RatingRecord> ratings, const GroupBy& g) {
  std::vector<MosRow> out;
  for (const auto& [cell, scores] : detail::bucket(ratings, g))
    out.push_back({cell.first, cell.second, stats::mos_ci(std::span<const double>(scores))});
  return out;
}

inline void write_mos_csv(std::ostream& os, std::span<const MosRow> rows, const GroupBy& g) {
  os << detail::header_for(g) << "dimension,n,mos,sd,ci_low,ci_high\n";
  for (const auto& r : rows)
    os << detail::cells_for(r.key, g) << token(r.dimension) << ',' << r.mos.n << ',' << csv::num(r.mos.mos) << ','
       << csv::num(r.mos.sd) << ',' << csv::num(r.mos.ci_low) << ',' << csv::num(r.mos.ci_high) << '\n';
}

/// Cohen's h of the share of ratings at or above `threshold` against `baseline`.
inline void write_h_csv(std::ostream& os, std::span<const RatingRecord> ratings, const GroupBy& g,
                        int threshold = 4, double baseline = 0.5) {
  os << detail::header_for(g) << "dimension,n,proportion,h\n";
  for (const auto& [cell, scores] : detail::bucket(ratings, g)) {
    std::size_t hits = 0;
    for (double s : scores) hits += s >= threshold ? 1 : 0;
    const double p = static_cast<double>(hits) / static_cast<double>(scores.size());
    os << detail::cells_for(cell.first, g) << token(cell.second) << ',' << scores.size() << ',' << csv::num(p)
       << ',' << csv::num(stats::cohens_h(p, baseline).h) << '\n';
  }
}

/// Repeated-measures ANOVA over latency levels, one test per stratum of the
/// remaining group-by fields and per dimension. Subjects are participants;
/// a subject lacking any level in the stratum is left out.
inline void write_anova_csv(std::ostream& os, std::span<const RatingRecord> ratings, const GroupBy& g) {
  const GroupBy strata = g.without_latency();
  os << detail::header_for(strata) << "dimension,n_subjects,n_levels,F,df_effect,df_error,p,partial_eta_sq,note\n";
  // stratum -> dimension -> subject -> latency -> scores
  std::map<detail::Cell, std::map<std::string, std::map<std::int64_t, std::vector<double>>>> cells;
  std::map<detail::Cell, std::set<std::int64_t>> levels;
  for (const auto& r : ratings) {
    detail::Cell c{GroupKey::of(r.condition, strata), r.dimension};
    cells[c][r.pair_id + "/" + r.participant_id][r.condition.latency_ms].push_back(r.score);
    levels[c].insert(r.condition.latency_ms);
  }
  for (const auto& [cell, subjects] : cells) {
    const auto& lv = levels[cell];
    std::vector<std::vector<double>> matrix;
    for (const auto& [subject, by_level] : subjects) {
      if (by_level.size() != lv.size()) continue;
      std::vector<double> row;
      for (auto l : lv) row.push_back(stats::mean(by_level.at(l)));
      matrix.push_back(std::move(row));
    }
    os << detail::cells_for(cell.first, strata) << token(cell.second) << ',' << matrix.size() << ',' << lv.size()
       << ',';
    try {
      const auto a = stats::rm_anova(matrix);
      os << csv::num(a.F) << ',' << a.df_effect << ',' << a.df_error << ',' << csv::num(a.p) << ','
         << csv::num(a.partial_eta_sq) << ",\n";
    } catch (const Error& e) {
      os << ",,,,," << to_string(e.code()) << '\n';
    }
  }
}

/// Pearson r between each sub-dimension's MOS and overall MOS across the
/// latency levels of each stratum.
inline void write_r_csv(std::ostream& os, std::span<const RatingRecord> ratings, const GroupBy& g) {
  const GroupBy strata = g.without_latency();
  os << detail::header_for(strata) << "dimension,n_points,r,note\n";
  GroupBy with_latency = strata;
  with_latency.latency = true;
  // stratum -> latency -> dimension -> MOS
  std::map<GroupKey, std::map<std::int64_t, std::map<Dimension, double>>> table;
  for (const auto& [cell, scores] : detail::bucket(ratings, with_latency)) {
    GroupKey s = cell.first;
    const auto latency = *s.latency_ms;
    s.latency_ms.reset();
    table[s][latency][cell.second] = stats::mean(scores);
  }
  for (const auto& [stratum, by_level] : table) {
    for (auto dim : {Dimension::Interactivity, Dimension::Efficiency, Dimension::Believability}) {
      std::vector<double> x, y;
      for (const auto& [lat, mos] : by_level) {
        if (mos.contains(dim) && mos.contains(Dimension::Overall)) {
          x.push_back(mos.at(dim));
          y.push_back(mos.at(Dimension::Overall));
        }
      }
      os << detail::cells_for(stratum, strata) << token(dim) << ',' << x.size() << ',';
      try {
        os << csv::num(stats::pearson_r(x, y).r) << ",\n";
      } catch (const Error& e) {
        os << ',' << to_string(e.code()) << '\n';
      }
    }
  }
}

/// Paired t between overall and each sub-dimension, pairing the two ratings a
/// participant gave for the same condition.
inline void write_t_csv(std::ostream& os, std::span<const RatingRecord> ratings, const GroupBy& g) {
  os << detail::header_for(g) << "dimension,n,mean_diff,t,df,p,degenerate,note\n";
  // group -> (subject, condition) -> dimension -> score
  std::map<GroupKey, std::map<std::pair<std::string, Condition>, std::map<Dimension, double>>> table;
  for (const auto& r : ratings)
    table[GroupKey::of(r.condition, g)][{r.pair_id + "/" + r.participant_id, r.condition}][r.dimension] = r.score;
  for (const auto& [key, obs] : table) {
    for (auto dim : {Dimension::Interactivity, Dimension::Efficiency, Dimension::Believability}) {
      std::vector<double> overall, sub;
      for (const auto& [id, scores] : obs) {
        if (scores.contains(dim) && scores.contains(Dimension::Overall)) {
          overall.push_back(scores.at(Dimension::Overall));
          sub.push_back(scores.at(dim));
        }
      }
      os << detail::cells_for(key, g) << token(dim) << ',' << overall.size() << ',';
      try {
        const auto t = stats::paired_t(overall, sub);
        os << csv::num(t.mean_diff) << ',' << csv::num(t.t) << ',' << t.df << ',' << csv::num(t.p) << ','
           << (t.degenerate ? "true" : "false") << ",\n";
      } catch (const Error& e) {
        os << ",,,,," << to_string(e.code()) << '\n';
      }
    }
  }
}

}  // namespace wbqoe
