// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "wbqoe/analysis.hpp"
#include "wbqoe/latency_injector.hpp"
#include "wbqoe/orchestrator.hpp"
#include "wbqoe/schedule.hpp"
#include "wbqoe/simharness.hpp"
#include "wbqoe/stats.hpp"

using namespace wbqoe;
namespace fs = std::filesystem;

namespace {

const std::vector<std::int64_t> kLevels = {100, 300, 600, 1000, 1500, 2000, 2500};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
  std::cout << (ok ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

void injection_conformance() {
  const auto t0 = Clock::now();
  std::size_t messages = 0, violations = 0;
  double worst_excess = 0.0;
  for (double di : {80.0, 27.0}) {
    for (auto dt : kLevels) {
      const auto r = sim::measure_latency(dt, di, 1000, static_cast<std::uint64_t>(dt));
      messages += r.delays.size();
      violations += r.violations;
      if (r.delays.size() != 1000) ++violations;
      worst_excess = std::max(worst_excess, r.max_ms - (static_cast<double>(dt) - di));
    }
  }
  const double secs = seconds_since(t0);
  report(1, "latency-injection conformance", violations == 0 && secs < 10.0,
         std::to_string(messages) + " messages over 7 levels x Di {80, 27}, " + std::to_string(violations) +
             " violations, worst excess " + fmt(worst_excess) + " ms (< 16.67), " + fmt(secs, 3) + " s");
}

void fifo_order() {
  const auto t0 = Clock::now();
  Rng rng(2025);
  ManualClock clock;
  InjectorQueue<std::pair<int, std::int64_t>> q(clock, {from_ms(600), from_ms(80), 60.0});
  std::array<std::int64_t, 2> next_seq{0, 0};
  std::array<std::int64_t, 2> last_seen{-1, -1};
  std::int64_t pushed = 0, last_global = -1, released = 0, inversions = 0;
  std::map<std::int64_t, std::int64_t> global_of;  // (stream << 32 | seq) -> arrival index
  auto take = [&](const std::pair<int, std::int64_t>& item) {
    const auto g = global_of.at((std::int64_t{item.first} << 32) | item.second);
    if (g <= last_global) ++inversions;
    if (item.second <= last_seen[static_cast<std::size_t>(item.first)]) ++inversions;
    last_global = g;
    last_seen[static_cast<std::size_t>(item.first)] = item.second;
    ++released;
  };
  while (pushed < 10'000) {
    clock.advance(Micros{static_cast<std::int64_t>(rng.uniform(25'000))});
    if (pushed == 5'000) q.set_target(from_ms(100 + static_cast<std::int64_t>(rng.uniform(2400))));
    if (rng.uniform(3) != 0) {
      const int stream = static_cast<int>(rng.uniform(2));
      const auto seq = next_seq[static_cast<std::size_t>(stream)]++;
      global_of[(std::int64_t{stream} << 32) | seq] = pushed++;
      q.push({stream, seq});
    } else {
      for (const auto& item : q.tick()) take(item);
    }
  }
  while (auto t = q.next_release_tick()) {
    clock.set(std::max(clock.now(), *t));
    for (const auto& item : q.tick()) take(item);
  }
  const double secs = seconds_since(t0);
  report(2, "FIFO and cross-stream order", inversions == 0 && released == pushed && secs < 5.0,
         std::to_string(released) + "/" + std::to_string(pushed) + " released, " + std::to_string(inversions) +
             " inversions, " + fmt(secs, 3) + " s");
}

void cohens_h_anchor() {
  const double h = stats::cohens_h(1.00, 0.50).h;
  Rng rng(3);
  std::size_t bad = 0;
  for (int i = 0; i < 10'000; ++i) {
    const double a = rng.unit(), b = rng.unit();
    if (stats::cohens_h(a, b).h != -stats::cohens_h(b, a).h) ++bad;
    if (stats::cohens_h(a, a).h != 0.0) ++bad;
  }
  report(3, "Cohen's h anchor", near(h, 1.5708, 0.001) && bad == 0,
         "h(1.00, 0.50) = " + fmt(h, 10) + " (1.5708 +/- 0.001), " + std::to_string(bad) +
             " property failures on 10000 pairs");
}

void stats_oracles() {
  std::vector<std::string> misses;
  auto check = [&](const std::string& what, double got, double want, double tol) {
    if (!near(got, want, tol)) misses.push_back(what + "=" + fmt(got, 12) + " want " + fmt(want, 12));
  };
  const std::vector<int> scores = {4, 4, 5, 3, 4, 2, 5, 4};
  const auto m = stats::mos_ci(std::span<const int>(scores));
  check("mos", m.mos, 3.875, 1e-9);
  check("ci_low", m.ci_low, 3.0464771753171775, 1e-6);
  check("ci_high", m.ci_high, 4.703522824682823, 1e-6);

  const std::vector<double> a = {1.2, 2.3, 2.9, 4.1, 5.5, 6.0, 7.2};
  const std::vector<double> b = {2.0, 2.9, 3.7, 4.0, 6.1, 5.8, 7.9};
  check("r", stats::pearson_r(a, b).r, 0.9812917043976273, 1e-6);

  const std::vector<double> x = {200, 174, 198, 170, 179, 182, 193, 209};
  const std::vector<double> y = {185, 169, 173, 173, 188, 186, 175, 180};
  const auto t = stats::paired_t(x, y);
  check("t", t.t, 1.8839207264029945, 1e-6);
  check("t.p", t.p, 0.10157895109718501, 1e-6);
  check("mean_diff", t.mean_diff, 9.5, 1e-9);

  const auto r = stats::rm_anova({{45, 50, 55}, {42, 42, 45}, {36, 41, 43}, {39, 35, 40}});
  check("F", r.F, 4.68, 1e-6);
  check("eta2", r.partial_eta_sq, 0.609375, 1e-6);
  check("ss_total", r.ss_total, 344.25, 1e-9);
  check("ss_subjects", r.ss_subjects, 248.25, 1e-9);
  check("ss_effect", r.ss_effect, 58.5, 1e-9);
  check("ss_error", r.ss_error, 37.5, 1e-9);
  check("ss_identity", r.ss_subjects + r.ss_effect + r.ss_error, r.ss_total, 1e-9);

  Rng rng(4);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 2 + rng.uniform(15);
    std::vector<std::vector<double>> cells(n);
    std::vector<double> p(n), q(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = (rng.unit() - 0.5) * 10;
      q[i] = (rng.unit() - 0.5) * 10;
      cells[i] = {p[i], q[i]};
    }
    const double tt = stats::paired_t(p, q).t;
    const double F = stats::rm_anova(cells).F;
    worst_rel = std::max(worst_rel, std::fabs(F - tt * tt) / std::max(1.0, tt * tt));
  }
  if (worst_rel > 1e-9) misses.push_back("F vs t^2 relative error " + fmt(worst_rel));
  report(4, "statistics oracle equivalence", misses.empty(),
         misses.empty() ? "mos_ci, pearson_r, paired_t, rm_anova match; worst |F - t^2| rel " + fmt(worst_rel, 3)
                        : misses.front() + (misses.size() > 1 ? " (+" + std::to_string(misses.size() - 1) + " more)" : ""));
}

void bot_invariants() {
  const auto t0 = Clock::now();
  std::map<Mode, std::size_t> violations, failed, contested;
  std::string first_note;
  for (Mode mode : {Mode::SC, Mode::FC}) {
    for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
      Rng rng(seed * 7919 + static_cast<std::uint64_t>(mode));
      sim::ConditionSpec spec;
      spec.condition = {static_cast<Platform>(rng.uniform(3)), mode, kLevels[rng.uniform(kLevels.size())]};
      spec.inherent_ms = spec.condition.platform == Platform::PC ? 27.0 : 80.0;
      const auto slots = 2 + rng.uniform(7);
      spec.task_slots = slots;
      spec.bots = sim::default_bots(seed);
      spec.codec_roundtrip = false;
      for (auto& bot : spec.bots) {
        bot.stroke_duration = from_ms(50 + static_cast<std::int64_t>(rng.uniform(400)));
        bot.fc_policy = rng.uniform(2) ? sim::FcPolicy::Random : sim::FcPolicy::AdversarialSameSlot;
        bot.rating_delay = from_ms(10);
      }
      const auto out = sim::run_condition(spec);
      const auto audit = sim::audit_rules(out.pair.log.snapshot(), "sim#0", mode);
      violations[mode] += audit.violations;
      contested[mode] += audit.contested_bursts;
      if (out.pair.record.error || audit.completions != slots) ++failed[mode];
      if (first_note.empty() && !audit.notes.empty()) first_note = audit.notes.front();
    }
  }
  const bool ok = violations[Mode::SC] + violations[Mode::FC] + failed[Mode::SC] + failed[Mode::FC] == 0;
  report(5, "SC alternation and FC single-claim", ok,
         "1000 sessions per mode; violations SC " + std::to_string(violations[Mode::SC]) + ", FC " +
             std::to_string(violations[Mode::FC]) + "; incomplete " +
             std::to_string(failed[Mode::SC] + failed[Mode::FC]) + "; contested FC bursts " +
             std::to_string(contested[Mode::FC]) + "; " + fmt(seconds_since(t0), 3) + " s" +
             (first_note.empty() ? "" : "; " + first_note));
}

void timing_law() {
  constexpr std::size_t n = 12;
  bool ok = true;
  double worst_ticks = 0.0;
  std::vector<double> fc;
  for (auto dt : kLevels) {
    const auto t = sim::sc_timing_check(n, from_ms(500), dt, 80.0);
    const auto excess = t.measured - t.predicted;
    const double ticks = static_cast<double>(excess.count()) * 60.0 / 1e6;
    worst_ticks = std::max(worst_ticks, ticks);
    if (t.error || excess.count() < 0 || ticks > static_cast<double>(n + 1)) ok = false;
    const auto d = sim::fc_completion(n, from_ms(500), dt, 80.0);
    if (!d) ok = false;
    fc.push_back(d ? to_ms(*d) : 0.0);
  }
  const auto [lo, hi] = std::minmax_element(fc.begin(), fc.end());
  const double spread = *lo > 0 ? (*hi - *lo) / *lo : 1.0;
  ok = ok && spread < 0.02;
  report(6, "SC timing law and FC flatness", ok,
         "SC worst excess over N d + (N-1)(Dt-Di) " + fmt(worst_ticks, 3) + " ticks (<= 13); FC spread " +
             fmt(spread * 100.0, 3) + "% (< 2%)");
}

void schedule_correctness() {
  const ExperimentConfig config;
  std::size_t bad = 0;
  // count[latency][position within block]
  std::map<std::int64_t, std::array<std::size_t, 7>> count;
  std::size_t blocks = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto s = generate_schedule("pair", config, seed);
    const std::set<Condition> seen(s.conditions.begin(), s.conditions.end());
    if (s.conditions.size() != 42 || seen.size() != 42) ++bad;
    for (std::size_t i = 0; i + 7 <= s.conditions.size(); i += 7) {
      ++blocks;
      for (std::size_t p = 0; p < 7; ++p) {
        const auto& c = s.conditions[i + p];
        if (c.platform != s.conditions[i].platform || c.mode != s.conditions[i].mode) ++bad;
        ++count[c.latency_ms][p];
      }
    }
    if (to_json(s).dump() != to_json(generate_schedule("pair", config, seed)).dump()) ++bad;
  }
  double worst = 0.0;
  for (const auto& [lat, row] : count)
    for (auto c : row) worst = std::max(worst, std::fabs(static_cast<double>(c) / static_cast<double>(blocks) - 1.0 / 7.0));
  report(7, "schedule correctness", bad == 0 && worst <= 0.05,
         "1000 seeds, " + std::to_string(bad) + " bad schedules, worst positional deviation from 1/7 " + fmt(worst, 3) +
             " (<= 0.05), repeat runs byte-identical");
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) n += !line.empty();
  return n;
}

void end_to_end(const char* cli) {
  const auto t0 = Clock::now();
  const auto out = sim::run_experiment("pair-e2e", 42);
  const double secs = seconds_since(t0);
  const auto dir = fs::temp_directory_path() / ("wbqoe-acceptance-" + std::to_string(Clock::now().time_since_epoch().count()));
  fs::remove_all(dir);
  export_run(out.record, out.log, dir / "pair-e2e");
  const auto csv = dir / "ratings.csv";
  const auto rows = export_ratings(dir, csv);

  std::size_t mos_rows = 0;
  std::string how;
  if (cli && *cli) {
    const auto mos = dir / "mos.csv";
    const std::string cmd = std::string("\"") + cli + "\" analyze --ratings \"" + csv.string() +
                            "\" --group-by platform,mode,latency --stat mos --out \"" + mos.string() + "\"";
    if (std::system(cmd.c_str()) == 0) mos_rows = count_lines(mos) - 1;  // minus header
    how = "analyze CLI";
  } else {
    mos_rows = aggregate(load_ratings_csv(csv.string()).ratings, GroupBy::parse("platform,mode,latency")).size();
    how = "aggregate()";
  }
  fs::remove_all(dir);
  std::size_t completed = 0;
  for (const auto& c : out.record.conditions) completed += c.status == ConditionStatus::Completed;
  const bool ok = !out.record.error && completed == 42 && secs < 60.0 && rows == 336 && mos_rows == 42 * 4;
  report(8, "end-to-end bot experiment", ok,
         std::to_string(completed) + "/42 conditions in " + fmt(secs, 3) + " s wall, " + std::to_string(rows) +
             " CSV rows, " + std::to_string(mos_rows) + " MOS rows via " + how);
}

}  // namespace

int main(int argc, char** argv) {
  const char* cli = argc > 1 ? argv[1] : nullptr;
  injection_conformance();
  fifo_order();
  cohens_h_anchor();
  stats_oracles();
  bot_invariants();
  timing_law();
  schedule_correctness();
  end_to_end(cli);
  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
