#pragma once

// The staged pipeline: S1 multi-start descent, S2 basin hopping on the ULP
// objective, S3 lattice refinement, inside an outer restart loop.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "formula.hpp"
#include "linalg.hpp"
#include "objectives.hpp"
#include "optimizer.hpp"

namespace ulpsolve {

enum class VerdictKind : std::uint8_t { Sat, UnsatGuess, Timeout };

inline const char* verdict_name(VerdictKind k) noexcept {
  switch (k) {
    case VerdictKind::Sat: return "sat";
    case VerdictKind::UnsatGuess: return "unsat-guess";
    case VerdictKind::Timeout: return "timeout";
  }
  return "unknown";
}

struct StageSummary {
  int restart = 0;
  ObjectiveKind stage = ObjectiveKind::S1;
  double value = 0.0;
  bool exact_zero = false;
  std::size_t evaluations = 0;
  Clock::duration elapsed{};
  OptStatus status = OptStatus::Converged;
};

inline const char* stage_name(ObjectiveKind k) noexcept {
  switch (k) {
    case ObjectiveKind::S1: return "S1";
    case ObjectiveKind::S2: return "S2";
    case ObjectiveKind::S3: return "S3";
  }
  return "?";
}

struct Verdict {
  VerdictKind kind = VerdictKind::Timeout;
  std::optional<Assignment> model;  // Sat only
  std::optional<double> score;      // UnsatGuess only
  std::vector<StageSummary> stage_trace;
};

/// Raised when a claimed model fails IEEE validation. Always a solver bug.
class InternalInconsistency : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline OptimizerConfig default_stage_config(ObjectiveKind stage) {
  OptimizerConfig c;
  c.hops = stage == ObjectiveKind::S1 ? 30 : 10;
  return c;
}

struct EngineConfig {
  OptimizerConfig stage1 = default_stage_config(ObjectiveKind::S1);
  OptimizerConfig stage2 = default_stage_config(ObjectiveKind::S2);
  OptimizerConfig stage3 = default_stage_config(ObjectiveKind::S3);
  Clock::duration time_budget = std::chrono::seconds(1200);
  int n_start_over = 10;
  std::uint64_t seed = 0;
  Ablation ablation;
  /// Run S1 starts concurrently. Only verdict classes are reproducible then.
  bool parallel = false;
};

/// Checks a candidate under IEEE semantics and hands it back unchanged.
inline Assignment validate_and_emit(const Formula& f, Assignment candidate) {
  if (candidate.size() != f.dimension()) throw InternalInconsistency("candidate has the wrong dimension");
  if (!is_finite_assignment(candidate)) throw InternalInconsistency("candidate contains a non-finite value");
  if (!is_model(f, candidate)) throw InternalInconsistency("exact-zero candidate is not a model");
  return candidate;
}

namespace detail {

inline StageSummary summarize(int restart, ObjectiveKind stage, const OptResult& r) {
  return {restart, stage, r.best_value, r.exact_zero, r.evaluations, r.elapsed, r.status};
}

}  // namespace detail

/// Decides `f`, returning exactly one of sat (with a validated model),
/// unsat-guess (with the best positive S2/S3 value) or timeout.
inline Verdict solve(const Formula& f, const EngineConfig& cfg) {
  const auto started = Clock::now();
  const auto deadline = cfg.time_budget >= Clock::time_point::max() - started ? Clock::time_point::max()
                                                                              : started + cfg.time_budget;
  Verdict verdict;
  auto timeout = [&]() {
    verdict.kind = VerdictKind::Timeout;
    return verdict;
  };
  auto sat = [&](Assignment candidate) {
    verdict.kind = VerdictKind::Sat;
    verdict.model = validate_and_emit(f, std::move(candidate));
    return verdict;
  };
  if (cfg.time_budget <= Clock::duration::zero()) return timeout();

  // Built once; the projector's factorization is reused by every restart.
  const Extraction ex = extract_linear(f);
  const std::optional<Projector> proj = Projector::build(ex.system);
  const Objective s1 = build_s1(f, ex, proj, cfg.ablation);
  const Objective s2 = build_s2(f, cfg.ablation);
  const StartBox box(f);
  // S1 starts are moved onto the affine set when it exists: the distance term
  // is then zero and the search begins on the remainder.
  const bool project_starts = proj && s1.has_projection();
  auto s1_start = [&](std::mt19937_64& rng) {
    auto x = box(rng);
    return project_starts ? proj->foot(x) : x;
  };

  if (f.dimension() == 0) {
    const std::vector<double> none;
    if (s2.evaluate(none).exact_zero) return sat(Assignment{});
    verdict.kind = VerdictKind::UnsatGuess;
    verdict.score = s2.evaluate(none).value;
    return verdict;
  }

  double best_score = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < std::max(cfg.n_start_over, 1); ++restart) {
    if (Clock::now() >= deadline) return timeout();
    const std::uint64_t seed_r = derive_seed(cfg.seed, static_cast<std::uint64_t>(restart));

    std::vector<double> x1;
    if (!cfg.ablation.no_s1) {
      OptimizerConfig c1 = cfg.stage1;
      c1.rng_seed = derive_seed(seed_r, 1);
      c1.deadline = std::min(c1.deadline, deadline);
      c1.parallel = c1.parallel || cfg.parallel;
      const OptResult r1 = multi_start(s1, c1, s1_start);
      verdict.stage_trace.push_back(detail::summarize(restart, ObjectiveKind::S1, r1));
      if (r1.timed_out) return timeout();
      x1 = r1.best_point;
    } else {
      std::mt19937_64 rng(derive_seed(seed_r, 1));
      x1 = box(rng);
    }

    OptimizerConfig c2 = cfg.stage2;
    c2.rng_seed = derive_seed(seed_r, 2);
    c2.deadline = std::min(c2.deadline, deadline);
    const OptResult r2 = basin_hop(s2, x1, c2);
    verdict.stage_trace.push_back(detail::summarize(restart, ObjectiveKind::S2, r2));
    if (r2.exact_zero) return sat(s2.assignment_at(r2.best_point));
    if (r2.timed_out) return timeout();
    double score = r2.best_value;

    if (!cfg.ablation.no_s3) {
      const Objective s3 = build_s3(s2, s2.assignment_at(r2.best_point));
      OptimizerConfig c3 = cfg.stage3;
      c3.rng_seed = derive_seed(seed_r, 3);
      c3.deadline = std::min(c3.deadline, deadline);
      const OptResult r3 = lattice_refine(s3, c3);
      verdict.stage_trace.push_back(detail::summarize(restart, ObjectiveKind::S3, r3));
      if (r3.exact_zero) return sat(s3.assignment_at(r3.best_point));
      if (r3.timed_out) return timeout();
      score = std::min(score, r3.best_value);
    }
    best_score = std::min(best_score, score);
  }
  verdict.kind = VerdictKind::UnsatGuess;
  verdict.score = best_score;
  return verdict;
}

}  // namespace ulpsolve
