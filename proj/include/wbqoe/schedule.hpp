#pragma once

// Randomized, reproducible experiment plans.
//
// RNG: xoshiro256** whose four state words are the first four outputs of
// splitmix64(seed). Uniform integers in [0, n) use rejection sampling
// (discard r < 2^64 mod n, return r mod n). Shuffles are Fisher-Yates from the
// back: for i = n-1 .. 1, swap(v[i], v[uniform(i + 1)]).
//
// Draw order for a schedule: shuffle the platforms; then for each platform in
// that order shuffle the modes; then for each (platform, mode) shuffle the
// latency levels. Any implementation of these rules reproduces the same plan.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wbqoe/error.hpp"
#include "wbqoe/protocol.hpp"
#include "wbqoe/types.hpp"

namespace wbqoe {

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, n); n > 0.
  std::uint64_t uniform(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = (*this)();
      if (r >= threshold) return r % n;
    }
  }

  /// Uniform in [0, 1) with 53 bits.
  double unit() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::array<std::uint64_t, 4> s_{};
};

/// FNV-1a, used to derive per-pair seeds from a service-wide seed.
constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::uint64_t pair_seed(std::uint64_t service_seed, std::string_view pair_id) {
  std::uint64_t s = service_seed ^ fnv1a64(pair_id);
  return splitmix64(s);
}

struct ExperimentConfig {
  std::vector<std::int64_t> latency_levels{100, 300, 600, 1000, 1500, 2000, 2500};
  std::vector<Platform> platforms{Platform::VRPlus, Platform::VR, Platform::PC};
  std::vector<Mode> modes{Mode::SC, Mode::FC};
  std::map<Platform, double> inherent_latency_ms{
      {Platform::VRPlus, 80.0}, {Platform::VR, 80.0}, {Platform::PC, 27.0}};
  double tick_rate = 60.0;
  double break_after_platform_min = 15.0;  // informational
  std::int64_t rating_timeout_ms = 600'000;

  double inherent_for(Platform p) const {
    auto it = inherent_latency_ms.find(p);
    return it == inherent_latency_ms.end() ? 0.0 : it->second;
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(Errc::InvalidConfig, m); };
    if (latency_levels.empty()) bad("no latency levels");
    if (platforms.empty()) bad("no platforms");
    if (modes.empty()) bad("no modes");
    for (std::size_t i = 1; i < latency_levels.size(); ++i)
      if (latency_levels[i] <= latency_levels[i - 1]) bad("latency levels must be strictly increasing");
    if (std::set(platforms.begin(), platforms.end()).size() != platforms.size()) bad("duplicate platform");
    if (std::set(modes.begin(), modes.end()).size() != modes.size()) bad("duplicate mode");
    if (!(tick_rate > 0.0)) bad("tick_rate must be positive");
    if (rating_timeout_ms <= 0) bad("rating_timeout_ms must be positive");
    for (auto p : platforms) {
      const double di = inherent_for(p);
      if (di < 0.0) bad("negative inherent latency");
      for (auto level : latency_levels)
        if (static_cast<double>(level) < di)
          bad("latency level " + std::to_string(level) + " below inherent latency of " + std::string(token(p)));
    }
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json platforms = nlohmann::json::array(), modes = nlohmann::json::array(),
                 inherent = nlohmann::json::object();
  for (auto p : c.platforms) platforms.push_back(token(p));
  for (auto m : c.modes) modes.push_back(token(m));
  for (const auto& [p, v] : c.inherent_latency_ms) inherent[std::string(token(p))] = v;
  return {{"latency_levels", c.latency_levels},
          {"platforms", platforms},
          {"modes", modes},
          {"inherent_latency_ms", inherent},
          {"tick_rate", c.tick_rate},
          {"break_after_platform_min", c.break_after_platform_min},
          {"rating_timeout_ms", c.rating_timeout_ms}};
}

/// Missing keys keep their defaults.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw Error(Errc::InvalidConfig, "config is not an object");
    if (j.contains("latency_levels")) c.latency_levels = j["latency_levels"].get<std::vector<std::int64_t>>();
    if (j.contains("platforms")) {
      c.platforms.clear();
      for (const auto& p : j["platforms"]) {
        auto v = parse_Platform(p.get<std::string>());
        if (!v) throw Error(Errc::InvalidConfig, "unknown platform " + p.dump());
        c.platforms.push_back(*v);
      }
    }
    if (j.contains("modes")) {
      c.modes.clear();
      for (const auto& m : j["modes"]) {
        auto v = parse_Mode(m.get<std::string>());
        if (!v) throw Error(Errc::InvalidConfig, "unknown mode " + m.dump());
        c.modes.push_back(*v);
      }
    }
    if (j.contains("inherent_latency_ms")) {
      for (const auto& [k, v] : j["inherent_latency_ms"].items()) {
        auto p = parse_Platform(k);
        if (!p) throw Error(Errc::InvalidConfig, "unknown platform " + k);
        c.inherent_latency_ms[*p] = v.get<double>();
      }
    }
    if (j.contains("tick_rate")) c.tick_rate = j["tick_rate"].get<double>();
    if (j.contains("break_after_platform_min")) c.break_after_platform_min = j["break_after_platform_min"].get<double>();
    if (j.contains("rating_timeout_ms")) c.rating_timeout_ms = j["rating_timeout_ms"].get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot open " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::InvalidConfig, path + " is not valid JSON");
  return config_from_json(j);
}

struct ConditionSchedule {
  std::string pair_id;
  std::uint64_t seed = 0;
  std::vector<Condition> conditions;
  friend bool operator==(const ConditionSchedule&, const ConditionSchedule&) = default;
};

inline ConditionSchedule generate_schedule(const std::string& pair_id, const ExperimentConfig& config,
                                           std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ConditionSchedule sched{pair_id, seed, {}};
  auto platforms = config.platforms;
  rng.shuffle(platforms);
  for (auto platform : platforms) {
    auto modes = config.modes;
    rng.shuffle(modes);
    for (auto mode : modes) {
      auto levels = config.latency_levels;
      rng.shuffle(levels);
      for (auto level : levels) sched.conditions.push_back({platform, mode, level});
    }
  }
  return sched;
}

inline nlohmann::json to_json(const ConditionSchedule& s) {
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : s.conditions) conds.push_back(to_json(c));
  return {{"pair_id", s.pair_id}, {"seed", s.seed}, {"conditions", std::move(conds)}};
}

inline ConditionSchedule schedule_from_json(const nlohmann::json& j) {
  ConditionSchedule s;
  try {
    s.pair_id = j.at("pair_id").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("conditions")) s.conditions.push_back(condition_from_json(c));
  } catch (const std::exception& e) {
    throw Error(Errc::InvalidConfig, e.what());
  }
  return s;
}

}  // namespace wbqoe
