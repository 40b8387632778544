#pragma once

// Benchmark bookkeeping: per-run records, per-instance aggregation over
// repeats, suite metrics and their CSV forms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "engine.hpp"
#include "smtlib.hpp"

namespace ulpsolve::bench {

enum class RunVerdict : std::uint8_t { Sat, UnsatGuess, Timeout, Error };

inline const char* run_verdict_name(RunVerdict v) noexcept {
  switch (v) {
    case RunVerdict::Sat: return "sat";
    case RunVerdict::UnsatGuess: return "unsat-guess";
    case RunVerdict::Timeout: return "timeout";
    case RunVerdict::Error: return "error";
  }
  return "error";
}

inline bool decided(RunVerdict v) noexcept { return v == RunVerdict::Sat || v == RunVerdict::UnsatGuess; }

struct RunRecord {
  std::string path;
  int run = 0;
  RunVerdict verdict = RunVerdict::Error;
  double time_s = 0.0;
  std::optional<std::string> model_text;
  std::uint64_t seed = 0;
  std::string config_digest;
};

/// One instance after folding its repeats.
struct InstanceOutcome {
  std::string path;
  RunVerdict verdict = RunVerdict::Error;
  double time_s = 0.0;
};

struct SuiteSummary {
  std::size_t n = 0;
  std::size_t n_sat = 0;
  std::size_t n_unsat_guess = 0;
  std::size_t n_timeout = 0;
  std::size_t n_error = 0;
  std::optional<double> sat_recall;  // only with ground truth
  double timeout_rate = 0.0;
  double mean_time_s = 0.0;
  double median_time_s = 0.0;
};

enum class Expected : std::uint8_t { Sat, Unsat };

class SoundnessViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Folds repeats per instance: sat if any repeat found a model, otherwise
/// unsat-guess if any repeat decided, otherwise the first repeat's verdict.
/// Time is the mean over deciding repeats (or over all repeats when none
/// decided, with timeouts counted at `cap_s`).
inline std::vector<InstanceOutcome> aggregate_repeats(const std::vector<RunRecord>& runs, double cap_s) {
  std::map<std::string, std::vector<const RunRecord*>> by_path;
  std::vector<std::string> order;
  for (const auto& r : runs) {
    auto [it, inserted] = by_path.try_emplace(r.path);
    if (inserted) order.push_back(r.path);
    it->second.push_back(&r);
  }
  std::vector<InstanceOutcome> out;
  for (const auto& path : order) {
    const auto& rs = by_path[path];
    InstanceOutcome o{path, rs.front()->verdict, 0.0};
    bool any_sat = false;
    bool any_unsat = false;
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto* r : rs) {
      any_sat = any_sat || r->verdict == RunVerdict::Sat;
      any_unsat = any_unsat || r->verdict == RunVerdict::UnsatGuess;
      if (decided(r->verdict)) {
        sum += r->time_s;
        ++count;
      }
    }
    if (any_sat) o.verdict = RunVerdict::Sat;
    else if (any_unsat) o.verdict = RunVerdict::UnsatGuess;
    if (count == 0) {
      for (const auto* r : rs) sum += r->verdict == RunVerdict::Timeout ? cap_s : r->time_s;
      count = rs.size();
    }
    o.time_s = sum / static_cast<double>(count);
    out.push_back(std::move(o));
  }
  return out;
}

/// Median with the lower-middle element for even counts.
inline double lower_median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  return xs[(xs.size() - 1) / 2];
}

inline std::string basename_of(const std::string& path) {
  return std::filesystem::path(path).filename().string();
}

inline std::optional<Expected> lookup_expected(const std::map<std::string, Expected>& expected, const std::string& path) {
  if (auto it = expected.find(path); it != expected.end()) return it->second;
  if (auto it = expected.find(basename_of(path)); it != expected.end()) return it->second;
  return std::nullopt;
}

/// Suite metrics. Timeouts enter the time statistics at `cap_s`. With ground
/// truth, recall is taken over the covered instances whose status is sat.
inline SuiteSummary summarize(const std::vector<InstanceOutcome>& outcomes, double cap_s,
                              const std::map<std::string, Expected>* expected = nullptr,
                              std::size_t* uncovered = nullptr) {
  SuiteSummary s;
  s.n = outcomes.size();
  std::vector<double> times;
  std::size_t gt_sat = 0;
  std::size_t found_sat = 0;
  std::size_t missing = 0;
  for (const auto& o : outcomes) {
    switch (o.verdict) {
      case RunVerdict::Sat: ++s.n_sat; break;
      case RunVerdict::UnsatGuess: ++s.n_unsat_guess; break;
      case RunVerdict::Timeout: ++s.n_timeout; break;
      case RunVerdict::Error: ++s.n_error; break;
    }
    times.push_back(o.verdict == RunVerdict::Timeout ? cap_s : o.time_s);
    if (expected) {
      const auto e = lookup_expected(*expected, o.path);
      if (!e) {
        ++missing;
        continue;
      }
      if (*e == Expected::Sat) {
        ++gt_sat;
        if (o.verdict == RunVerdict::Sat) ++found_sat;
      }
    }
  }
  if (s.n > 0) {
    s.timeout_rate = static_cast<double>(s.n_timeout) / static_cast<double>(s.n);
    double sum = 0.0;
    for (double t : times) sum += t;
    s.mean_time_s = sum / static_cast<double>(s.n);
    s.median_time_s = lower_median(times);
  }
  if (expected && gt_sat > 0) s.sat_recall = static_cast<double>(found_sat) / static_cast<double>(gt_sat);
  if (uncovered) *uncovered = missing;
  return s;
}

/// Throws SoundnessViolation when a sat verdict contradicts an unsat label.
inline void check_soundness(const std::vector<InstanceOutcome>& outcomes, const std::map<std::string, Expected>& expected) {
  for (const auto& o : outcomes) {
    const auto e = lookup_expected(expected, o.path);
    if (e && *e == Expected::Unsat && o.verdict == RunVerdict::Sat) {
      throw SoundnessViolation("sat reported for '" + o.path + "' whose expected status is unsat");
    }
  }
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kSummaryHeader =
    "n,n_sat,n_unsat_guess,n_timeout,n_error,sat_recall,timeout_rate,mean_time_s,median_time_s";
inline constexpr std::string_view kRunsHeader = "path,run,verdict,time,seed";

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << std::fixed << v;
  return os.str();
}

inline std::string summary_row(const SuiteSummary& s) {
  std::ostringstream os;
  os << s.n << ',' << s.n_sat << ',' << s.n_unsat_guess << ',' << s.n_timeout << ',' << s.n_error << ','
     << (s.sat_recall ? format_double(*s.sat_recall) : std::string()) << ',' << format_double(s.timeout_rate) << ','
     << format_double(s.mean_time_s) << ',' << format_double(s.median_time_s);
  return os.str();
}

inline void write_summary_csv(std::ostream& os, const SuiteSummary& s) {
  os << kSummaryHeader << '\n' << summary_row(s) << '\n';
}

inline void write_runs_csv(std::ostream& os, const std::vector<RunRecord>& runs) {
  os << kRunsHeader << '\n';
  for (const auto& r : runs) {
    os << csv_field(r.path) << ',' << r.run << ',' << run_verdict_name(r.verdict) << ',' << format_double(r.time_s)
       << ',' << r.seed << '\n';
  }
}

/// Reads `path,status` lines (status sat|unsat). A header line is skipped.
inline std::map<std::string, Expected> read_expected_csv(std::istream& is) {
  std::map<std::string, Expected> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw std::runtime_error("expected CSV line " + std::to_string(lineno) + ": missing comma");
    std::string path = line.substr(0, comma);
    std::string status = line.substr(comma + 1);
    if (path.size() >= 2 && path.front() == '"' && path.back() == '"') path = path.substr(1, path.size() - 2);
    if (lineno == 1 && path == "path") continue;
    if (status == "sat") out[path] = Expected::Sat;
    else if (status == "unsat") out[path] = Expected::Unsat;
    else throw std::runtime_error("expected CSV line " + std::to_string(lineno) + ": unknown status '" + status + "'");
  }
  return out;
}

/// FNV-1a digest of a configuration description, as 16 hex digits.
inline std::string digest(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Running suites

/// Configuration text hashed into RunRecord::config_digest.
inline std::string describe(const EngineConfig& cfg) {
  std::ostringstream os;
  auto stage = [&](const char* name, const OptimizerConfig& c) {
    os << name << ":starts=" << c.n_restarts << ",hops=" << c.hops << ",scale=" << c.perturbation_scale
       << ",iters=" << c.local_max_iters << ",bound=" << c.s3_bound << ';';
  };
  stage("s1", cfg.stage1);
  stage("s2", cfg.stage2);
  stage("s3", cfg.stage3);
  os << "budget_ms=" << std::chrono::duration_cast<std::chrono::milliseconds>(cfg.time_budget).count()
     << ";restarts=" << cfg.n_start_over << ";ablation=" << ablation_string(cfg.ablation)
     << ";parallel=" << cfg.parallel;
  return os.str();
}

/// Sorted list of the .smt2 files directly inside `dir`.
inline std::vector<std::string> list_instances(const std::filesystem::path& dir) {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".smt2") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Seed used for repeat `run` of a suite started with `seed`.
inline std::uint64_t run_seed(std::uint64_t seed, int run) {
  return run == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(run));
}

/// Solves one file once. Parse and unsupported-feature failures become
/// Error records; a sat model is checked again with is_model before it is
/// recorded, and a failure there throws SoundnessViolation.
inline RunRecord run_file(const std::string& path, EngineConfig cfg, int run) {
  RunRecord rec;
  rec.path = path;
  rec.run = run;
  rec.seed = cfg.seed = run_seed(cfg.seed, run);
  rec.config_digest = digest(describe(cfg));
  const auto started = Clock::now();
  Formula f;
  try {
    f = parse(read_file(path));
  } catch (const std::exception&) {
    rec.verdict = RunVerdict::Error;
    rec.time_s = std::chrono::duration<double>(Clock::now() - started).count();
    return rec;
  }
  const Verdict v = solve(f, cfg);
  rec.time_s = std::chrono::duration<double>(Clock::now() - started).count();
  switch (v.kind) {
    case VerdictKind::Sat:
      if (!v.model || !is_model(f, *v.model)) throw SoundnessViolation("model for '" + path + "' fails validation");
      rec.verdict = RunVerdict::Sat;
      rec.model_text = model_string(f, *v.model);
      break;
    case VerdictKind::UnsatGuess: rec.verdict = RunVerdict::UnsatGuess; break;
    case VerdictKind::Timeout: rec.verdict = RunVerdict::Timeout; break;
  }
  return rec;
}

/// Runs every file `repeats` times on `jobs` workers. Records come back in
/// (file, run) order regardless of scheduling.
inline std::vector<RunRecord> run_suite(const std::vector<std::string>& files, const EngineConfig& cfg, int repeats,
                                        int jobs) {
  repeats = std::max(repeats, 1);
  const std::size_t total = files.size() * static_cast<std::size_t>(repeats);
  std::vector<RunRecord> out(total);
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      try {
        out[k] = run_file(files[k / static_cast<std::size_t>(repeats)], cfg, static_cast<int>(k % static_cast<std::size_t>(repeats)));
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = total;
      }
    }
  };
  const auto n_workers = static_cast<std::size_t>(std::max(jobs, 1));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(n_workers, std::max<std::size_t>(total, 1)); ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

struct VariantRow {
  std::string variant;
  SuiteSummary summary;
  std::vector<InstanceOutcome> outcomes;
};

/// The full pipeline followed by each single-component ablation.
inline std::vector<std::pair<std::string, Ablation>> ablation_variants() {
  std::vector<std::pair<std::string, Ablation>> out{{"full", Ablation{}}};
  for (const char* name : {"no_s1", "no_s3", "no_projection", "absolute_residuals", "no_clause_product"}) {
    out.emplace_back(name, parse_ablation(name));
  }
  return out;
}

/// Runs the suite once per ablation variant, full pipeline first.
inline std::vector<VariantRow> run_ablation_study(const std::vector<std::string>& files, const EngineConfig& cfg,
                                                  int repeats, int jobs,
                                                  const std::map<std::string, Expected>* expected = nullptr) {
  const double cap_s = std::chrono::duration<double>(cfg.time_budget).count();
  std::vector<VariantRow> rows;
  for (const auto& [name, ablation] : ablation_variants()) {
    EngineConfig c = cfg;
    c.ablation = ablation;
    auto outcomes = aggregate_repeats(run_suite(files, c, repeats, jobs), cap_s);
    if (expected) check_soundness(outcomes, *expected);
    auto summary = summarize(outcomes, cap_s, expected);
    rows.push_back({name, summary, std::move(outcomes)});
  }
  return rows;
}

inline constexpr std::string_view kAblationHeader =
    "variant,n,n_sat,n_unsat_guess,n_timeout,n_error,sat_recall,timeout_rate,mean_time_s,median_time_s";

inline void write_ablation_csv(std::ostream& os, const std::vector<VariantRow>& rows) {
  os << kAblationHeader << '\n';
  for (const auto& r : rows) os << r.variant << ',' << summary_row(r.summary) << '\n';
}

}  // namespace ulpsolve::bench
