#pragma once

// Derivative-free minimization: Powell's conjugate-direction method, basin
// hopping around it, multi-start, and the bounded integer search used for
// lattice refinement.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <mutex>
#include <random>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "formula.hpp"
#include "objectives.hpp"

namespace ulpsolve {

using Clock = std::chrono::steady_clock;

struct OptimizerConfig {
  int n_restarts = 1;
  int hops = 10;
  double perturbation_scale = 1.0;
  int local_max_iters = 200;
  double local_tol = 1e-10;
  std::uint64_t rng_seed = 0;
  int s3_bound = 8;
  Clock::duration time_budget = std::chrono::hours(24);
  /// Hard stop shared with the caller (e.g. the solver's wall clock).
  Clock::time_point deadline = Clock::time_point::max();
  bool parallel = false;
};

enum class OptStatus : std::uint8_t { ZeroFound, Converged, BudgetExhausted };

inline const char* status_name(OptStatus s) noexcept {
  switch (s) {
    case OptStatus::ZeroFound: return "zero";
    case OptStatus::Converged: return "converged";
    case OptStatus::BudgetExhausted: return "budget";
  }
  return "?";
}

struct OptResult {
  std::vector<double> best_point;
  double best_value = std::numeric_limits<double>::infinity();
  bool exact_zero = false;
  std::size_t evaluations = 0;
  Clock::duration elapsed{};
  OptStatus status = OptStatus::Converged;
  /// Incumbent value after each hop (basin_hop) or start (multi_start).
  std::vector<double> trace;
  /// True when the stop came from the deadline rather than the hop/iteration budget.
  bool timed_out = false;
};

template <class F>
concept PointObjective = requires(const F& f, std::span<const double> x) {
  { f(x) } -> std::convertible_to<Evaluation>;
};

/// Adapter so an Objective can be passed where a callable is expected.
inline auto as_function(const Objective& obj) {
  return [&obj](std::span<const double> x) { return obj.evaluate(x); };
}

/// Independent RNG stream for (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E37'79B9'7F4A'7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58'476D'1CE4'E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D0'49BB'1331'11EBULL;
  return z ^ (z >> 31);
}

namespace detail {

/// Thrown through the search when it must stop; caught at the API boundary.
struct StopSearch {
  enum class Why : std::uint8_t { Zero, Deadline, Cancelled } why;
};

/// Wraps an objective: counts evaluations, remembers the best point seen and
/// checks the deadline every 1024 evaluations.
template <class F>
class Tracker {
 public:
  Tracker(const F& f, Clock::time_point deadline, const std::atomic<bool>* cancel = nullptr)
      : f_(f), deadline_(deadline), cancel_(cancel) {}

  double operator()(std::span<const double> x) {
    if ((evals_ & 1023) == 0 && evals_ > 0) {
      if (Clock::now() >= deadline_) throw StopSearch{StopSearch::Why::Deadline};
      if (cancel_ && cancel_->load(std::memory_order_relaxed)) throw StopSearch{StopSearch::Why::Cancelled};
    }
    ++evals_;
    const Evaluation e = f_(x);
    double v = e.value;
    if (!(v >= 0.0)) v = std::numeric_limits<double>::infinity();  // NaN or negative: reject
    if (e.exact_zero) v = 0.0;
    if (best_point_.empty() || v < best_value_ || (e.exact_zero && !best_zero_)) {
      best_value_ = v;
      best_zero_ = e.exact_zero;
      best_point_.assign(x.begin(), x.end());
    }
    if (e.exact_zero) throw StopSearch{StopSearch::Why::Zero};
    return v;
  }

  std::size_t evaluations() const noexcept { return evals_; }
  double best_value() const noexcept { return best_value_; }
  bool best_zero() const noexcept { return best_zero_; }
  const std::vector<double>& best_point() const noexcept { return best_point_; }
  bool deadline_passed() const { return Clock::now() >= deadline_; }

 private:
  const F& f_;
  Clock::time_point deadline_;
  const std::atomic<bool>* cancel_;
  std::size_t evals_ = 0;
  double best_value_ = std::numeric_limits<double>::infinity();
  bool best_zero_ = false;
  std::vector<double> best_point_;
};

inline constexpr double kGolden = 0.3819660112501051;  // 2 - phi

enum class StepPolicy : std::uint8_t {
  Relative,  // first trial step is 10% of the coordinate's magnitude
  Unit,      // first trial step is 1 (integer offset spaces)
};

/// One-dimensional minimization of f(x + t*u) starting at t = 0.
/// Updates x and fx in place; never increases fx.
template <class F>
void line_minimize(Tracker<F>& eval, std::vector<double>& x, double& fx, std::span<const double> u,
                   StepPolicy policy, double tol) {
  const std::size_t n = x.size();
  std::vector<double> probe(n);
  auto at = [&](double t) {
    for (std::size_t i = 0; i < n; ++i) probe[i] = x[i] + t * u[i];
    return eval(probe);
  };
  auto same_point = [&](double a, double b) {
    for (std::size_t i = 0; i < n; ++i)
      if (x[i] + a * u[i] != x[i] + b * u[i]) return false;
    return true;
  };

  double h = 1.0;
  if (policy == StepPolicy::Relative) {
    double mag = 0.0;
    double unorm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (u[i] != 0.0) mag = std::max(mag, std::abs(x[i]));
      unorm = std::max(unorm, std::abs(u[i]));
    }
    if (unorm == 0.0) return;
    h = (mag > 0.0 ? 0.1 * mag : 1.0) / unorm;
  }

  // Find a descent step, shrinking when both directions fail.
  double t1 = 0.0;
  double f1 = fx;
  for (int shrink = 0; shrink < 25; ++shrink) {
    if (same_point(0.0, h)) break;
    const double fp = at(h);
    if (fp < fx) {
      t1 = h;
      f1 = fp;
      break;
    }
    const double fm = at(-h);
    if (fm < fx) {
      t1 = -h;
      f1 = fm;
      break;
    }
    h /= 8.0;
  }
  if (t1 == 0.0) return;

  // Expand until the value rises: bracket [t0, t2] around t1.
  double t0 = 0.0;
  double f0 = fx;
  double t2 = 2.0 * t1;
  double f2 = 0.0;
  for (int expand = 0;; ++expand) {
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) finite = finite && std::isfinite(x[i] + t2 * u[i]);
    if (!finite || expand > 2100) {
      t2 = t1;
      f2 = f1;
      break;
    }
    f2 = at(t2);
    if (!(f2 < f1)) break;
    t0 = t1;
    f0 = f1;
    t1 = t2;
    f1 = f2;
    t2 *= 2.0;
  }
  (void)f0;

  // Golden-section refinement inside [lo, hi] with incumbent t1.
  double lo = std::min(t0, t2);
  double hi = std::max(t0, t2);
  double best_t = t1;
  double best_f = f1;
  for (int it = 0; it < 200; ++it) {
    if (hi - lo <= tol * std::abs(best_t) || same_point(lo, hi)) break;
    const bool right = (hi - best_t) > (best_t - lo);
    const double cand = right ? best_t + kGolden * (hi - best_t) : best_t - kGolden * (best_t - lo);
    if (cand == best_t || same_point(cand, best_t)) {
      // Resolution exhausted on the larger side; shrink it.
      if (right) hi = cand; else lo = cand;
      if (cand == best_t) break;
      continue;
    }
    const double fc = at(cand);
    if (fc < best_f) {
      if (right) lo = best_t; else hi = best_t;
      best_t = cand;
      best_f = fc;
    } else {
      if (right) hi = cand; else lo = cand;
    }
  }
  for (std::size_t i = 0; i < n; ++i) x[i] += best_t * u[i];
  fx = best_f;
}

/// Powell's method on an existing tracker. Returns Converged or
/// BudgetExhausted (iteration cap); zero and deadline stops propagate as
/// StopSearch.
template <class F>
OptStatus powell(Tracker<F>& eval, std::vector<double>& x, double& fx, const OptimizerConfig& cfg,
                 StepPolicy policy) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> dirs(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) dirs[i][i] = 1.0;
  std::vector<double> xe(n);
  for (int iter = 0; iter < cfg.local_max_iters; ++iter) {
    const std::vector<double> x_start = x;
    const double f_start = fx;
    double biggest = 0.0;
    std::size_t ibig = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double before = fx;
      line_minimize(eval, x, fx, dirs[i], policy, cfg.local_tol);
      if (before - fx > biggest) {
        biggest = before - fx;
        ibig = i;
      }
    }
    if (2.0 * (f_start - fx) <= cfg.local_tol * (std::abs(f_start) + std::abs(fx)) ||
        f_start - fx == 0.0) {
      return OptStatus::Converged;
    }
    if (n < 2) continue;
    std::vector<double> dnew(n);
    for (std::size_t i = 0; i < n; ++i) {
      dnew[i] = x[i] - x_start[i];
      xe[i] = x[i] + dnew[i];
    }
    const double fe = eval(xe);
    if (fe < f_start) {
      const double a = f_start - fx - biggest;
      const double b = f_start - fe;
      const double test = 2.0 * (f_start - 2.0 * fx + fe) * a * a - biggest * b * b;
      if (test < 0.0) {
        line_minimize(eval, x, fx, dnew, StepPolicy::Unit, cfg.local_tol);
        dirs[ibig] = std::move(dirs.back());
        dirs.back() = std::move(dnew);
      }
    }
  }
  return OptStatus::BudgetExhausted;
}

template <class F>
OptResult finish(const Tracker<F>& eval, Clock::time_point started, OptStatus status) {
  OptResult r;
  r.best_point = eval.best_point();
  r.best_value = eval.best_value();
  r.exact_zero = eval.best_zero();
  r.evaluations = eval.evaluations();
  r.elapsed = Clock::now() - started;
  r.status = r.exact_zero ? OptStatus::ZeroFound : status;
  return r;
}

inline Clock::time_point effective_deadline(const OptimizerConfig& cfg, Clock::time_point started) {
  const auto budget_end = cfg.time_budget >= Clock::time_point::max() - started ? Clock::time_point::max()
                                                                                 : started + cfg.time_budget;
  return std::min(budget_end, cfg.deadline);
}

template <class F>
void basin_hop_on(Tracker<F>& eval, std::span<const double> init, const OptimizerConfig& cfg, std::mt19937_64& rng,
                  StepPolicy policy, std::vector<double>& trace) {
  if (cfg.hops <= 0) {
    eval(init);
    return;
  }
  std::vector<double> best(init.begin(), init.end());
  double fbest = eval(best);
  powell(eval, best, fbest, cfg, policy);
  trace.push_back(fbest);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double scale = cfg.perturbation_scale;
  int rejections = 0;
  int acceptances = 0;
  for (int hop = 1; hop < cfg.hops; ++hop) {
    std::vector<double> x = best;
    for (double& xi : x) {
      const double mag = policy == StepPolicy::Unit || xi == 0.0 ? 1.0 : std::abs(xi);
      xi += scale * gauss(rng) * mag;
    }
    double fx = eval(x);
    powell(eval, x, fx, cfg, policy);
    if (fx < fbest) {
      best = std::move(x);
      fbest = fx;
      rejections = 0;
      if (++acceptances >= 2) {
        scale /= 2.0;
        acceptances = 0;
      }
    } else {
      acceptances = 0;
      if (++rejections >= 2) {
        scale *= 2.0;
        rejections = 0;
      }
    }
    trace.push_back(fbest);
  }
}

}  // namespace detail

/// Powell's conjugate-direction method from `start`.
template <PointObjective F>
OptResult local_minimize(const F& f, std::span<const double> start, const OptimizerConfig& cfg,
                         detail::StepPolicy policy = detail::StepPolicy::Relative) {
  const auto started = Clock::now();
  detail::Tracker<F> eval(f, detail::effective_deadline(cfg, started));
  OptStatus status = OptStatus::Converged;
  bool timed_out = false;
  try {
    std::vector<double> x(start.begin(), start.end());
    double fx = eval(x);
    status = detail::powell(eval, x, fx, cfg, policy);
  } catch (const detail::StopSearch& s) {
    timed_out = s.why == detail::StopSearch::Why::Deadline;
    status = OptStatus::BudgetExhausted;
  }
  auto r = detail::finish(eval, started, status);
  r.timed_out = timed_out && !r.exact_zero;
  return r;
}

inline OptResult local_minimize(const Objective& obj, std::span<const double> start, const OptimizerConfig& cfg) {
  return local_minimize(as_function(obj), start, cfg,
                        obj.kind() == ObjectiveKind::S3 ? detail::StepPolicy::Unit : detail::StepPolicy::Relative);
}

/// Basin hopping with strict-improvement acceptance. `cfg.hops` counts local
/// minimizations; the first starts at `init`, later ones at perturbations of
/// the incumbent.
template <PointObjective F>
OptResult basin_hop(const F& f, std::span<const double> init, const OptimizerConfig& cfg,
                    detail::StepPolicy policy = detail::StepPolicy::Relative,
                    const std::atomic<bool>* cancel = nullptr) {
  const auto started = Clock::now();
  detail::Tracker<F> eval(f, detail::effective_deadline(cfg, started), cancel);
  std::mt19937_64 rng(derive_seed(cfg.rng_seed, 0xB0B));
  std::vector<double> trace;
  OptStatus status = OptStatus::Converged;
  bool timed_out = false;
  try {
    detail::basin_hop_on(eval, init, cfg, rng, policy, trace);
  } catch (const detail::StopSearch& s) {
    timed_out = s.why == detail::StopSearch::Why::Deadline;
    status = OptStatus::BudgetExhausted;
  }
  auto r = detail::finish(eval, started, status);
  r.trace = std::move(trace);
  r.timed_out = timed_out && !r.exact_zero;
  return r;
}

inline OptResult basin_hop(const Objective& obj, std::span<const double> init, const OptimizerConfig& cfg) {
  return basin_hop(as_function(obj), init, cfg,
                   obj.kind() == ObjectiveKind::S3 ? detail::StepPolicy::Unit : detail::StepPolicy::Relative);
}

/// Runs basin_hop from `cfg.n_restarts` sampled starts; start k uses the RNG
/// stream derive_seed(cfg.rng_seed, k) for both sampling and perturbation.
template <PointObjective F, class Sampler>
OptResult multi_start(const F& f, const OptimizerConfig& cfg, Sampler&& sample,
                      detail::StepPolicy policy = detail::StepPolicy::Relative) {
  const auto started = Clock::now();
  const int starts = std::max(cfg.n_restarts, 1);
  std::vector<std::vector<double>> inits;
  inits.reserve(static_cast<std::size_t>(starts));
  for (int k = 0; k < starts; ++k) {
    std::mt19937_64 rng(derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(k)));
    inits.push_back(sample(rng));
  }
  OptimizerConfig per = cfg;
  per.deadline = detail::effective_deadline(cfg, started);
  per.time_budget = Clock::duration::max();

  auto run_one = [&](int k, const std::atomic<bool>* cancel) {
    OptimizerConfig c = per;
    c.rng_seed = derive_seed(cfg.rng_seed, static_cast<std::uint64_t>(k));
    return basin_hop(f, inits[static_cast<std::size_t>(k)], c, policy, cancel);
  };

  OptResult best;
  std::size_t evals = 0;
  bool timed_out = false;
  std::vector<double> trace;
  auto merge = [&](OptResult r) {
    evals += r.evaluations;
    timed_out = timed_out || r.timed_out;
    const bool better = best.best_point.empty() || (r.exact_zero && !best.exact_zero) ||
                        (!best.exact_zero && r.best_value < best.best_value);
    if (better) best = std::move(r);
    trace.push_back(best.best_value);
  };

  if (!cfg.parallel || starts == 1) {
    for (int k = 0; k < starts; ++k) {
      merge(run_one(k, nullptr));
      if (best.exact_zero || timed_out) break;
    }
  } else {
    std::vector<OptResult> results(static_cast<std::size_t>(starts));
    std::atomic<bool> cancel{false};
    std::atomic<int> next{0};
    const unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(), static_cast<unsigned>(starts)));
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int k = next++; k < starts; k = next++) {
          if (cancel.load()) break;
          results[static_cast<std::size_t>(k)] = run_one(k, &cancel);
          if (results[static_cast<std::size_t>(k)].exact_zero) cancel.store(true);
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& r : results)
      if (!r.best_point.empty()) merge(std::move(r));
  }
  best.evaluations = evals;
  best.elapsed = Clock::now() - started;
  best.trace = std::move(trace);
  best.timed_out = timed_out && !best.exact_zero;
  if (best.exact_zero) best.status = OptStatus::ZeroFound;
  else if (best.timed_out) best.status = OptStatus::BudgetExhausted;
  return best;
}

template <class Sampler>
OptResult multi_start(const Objective& obj, const OptimizerConfig& cfg, Sampler&& sample) {
  return multi_start(as_function(obj), cfg, std::forward<Sampler>(sample),
                     obj.kind() == ObjectiveKind::S3 ? detail::StepPolicy::Unit : detail::StepPolicy::Relative);
}

/// Bounded integer search over ULP offsets of an S3 objective.
///
/// Each hop runs coordinate descent on [-s3_bound, s3_bound]^d, trying deltas
/// -1, +1, -2, +2, ... per coordinate and keeping the best strict
/// improvement; if that stalls above zero, Powell continues over real-valued
/// offsets (rounded inside the objective). The first hop starts from the
/// anchor (all-zero offsets), later hops from Gaussian perturbations of the
/// incumbent offsets. Every evaluation is clamped to the box.
inline OptResult lattice_refine(const Objective& obj_s3, const OptimizerConfig& cfg) {
  if (obj_s3.kind() != ObjectiveKind::S3) throw std::invalid_argument("lattice_refine needs an S3 objective");
  const auto started = Clock::now();
  const std::size_t d = obj_s3.dimension();
  const double bound = static_cast<double>(std::max(cfg.s3_bound, 0));
  // The continuous phase may wander outside the box; it sees the clamped point.
  std::vector<double> clamped(d);
  auto fn = [&](std::span<const double> n) {
    for (std::size_t j = 0; j < d; ++j) clamped[j] = std::clamp(n[j], -bound, bound);
    return obj_s3.evaluate(clamped);
  };
  detail::Tracker<decltype(fn)> eval(fn, detail::effective_deadline(cfg, started));

  auto descend = [&](std::vector<double>& n, double& fv) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t j = 0; j < d; ++j) {
        const double base = n[j];
        double best_val = fv;
        double best_off = base;
        for (long step = 1; step <= 2 * cfg.s3_bound; ++step) {
          const double delta = (step % 2 == 1) ? -static_cast<double>((step + 1) / 2) : static_cast<double>(step / 2);
          const double cand = base + delta;
          if (std::abs(cand) > bound) continue;
          n[j] = cand;
          const double v = eval(n);
          if (v < best_val) {
            best_val = v;
            best_off = cand;
          }
        }
        n[j] = best_off;
        if (best_val < fv) {
          fv = best_val;
          changed = true;
        }
      }
    }
    if (fv > 0.0) detail::powell(eval, n, fv, cfg, detail::StepPolicy::Unit);
  };

  OptStatus status = OptStatus::Converged;
  bool timed_out = false;
  std::vector<double> trace;
  try {
    std::vector<double> best(d, 0.0);
    double fbest = eval(best);
    descend(best, fbest);
    trace.push_back(fbest);
    std::mt19937_64 rng(derive_seed(cfg.rng_seed, 0x53));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int hop = 1; hop < cfg.hops; ++hop) {
      std::vector<double> n = best;
      for (double& v : n) {
        v = std::round(v + cfg.perturbation_scale * gauss(rng));
        v = std::clamp(v, -bound, bound);
      }
      double fv = eval(n);
      descend(n, fv);
      if (fv < fbest) {
        best = std::move(n);
        fbest = fv;
      }
      trace.push_back(fbest);
    }
  } catch (const detail::StopSearch& s) {
    timed_out = s.why == detail::StopSearch::Why::Deadline;
    status = OptStatus::BudgetExhausted;
  }
  auto r = detail::finish(eval, started, status);
  for (double& v : r.best_point) v = static_cast<double>(detail::round_offset(std::clamp(v, -bound, bound)));
  r.trace = std::move(trace);
  r.timed_out = timed_out && !r.exact_zero;
  return r;
}

// ---------------------------------------------------------------------------
// Start points

/// Start-point sampler over the formula's variables.
///
/// Per coordinate: 20% from a pool of special values and formula constants,
/// 40% uniform in [-10, 10], 40% sign * 10^u with u uniform in [-300, 300].
/// Every sample is rounded into the variable's format and kept finite.
class StartBox {
 public:
  explicit StartBox(const Formula& f) {
    for (const auto& v : f.variables) formats_.push_back(v.format);
    pool_ = collect_constants(f);
    std::sort(pool_.begin(), pool_.end());
    pool_.erase(std::unique(pool_.begin(), pool_.end()), pool_.end());
  }

  std::span<const double> constant_pool() const noexcept { return pool_; }

  std::vector<double> operator()(std::mt19937_64& rng) const {
    std::vector<double> x(formats_.size());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> box(-10.0, 10.0);
    std::uniform_real_distribution<double> expo(-300.0, 300.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const FpFormat fmt = formats_[i];
      const double pick = unit(rng);
      double v = 0.0;
      if (pick < 0.2) {
        const double smallest_normal =
            fmt == FpFormat::Binary32 ? std::numeric_limits<float>::min() : std::numeric_limits<double>::min();
        const double specials[] = {0.0, 1.0, -1.0, smallest_normal, -smallest_normal};
        const std::size_t total = std::size(specials) + pool_.size();
        const auto k = std::uniform_int_distribution<std::size_t>(0, total - 1)(rng);
        v = k < std::size(specials) ? specials[k] : pool_[k - std::size(specials)];
      } else if (pick < 0.6) {
        v = box(rng);
      } else {
        const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
        v = sign * std::pow(10.0, expo(rng));
      }
      x[i] = detail::snap(std::isfinite(v) ? v : std::copysign(kSaturation, v), fmt);
    }
    return x;
  }

 private:
  std::vector<FpFormat> formats_;
  std::vector<double> pool_;
};

inline std::vector<double> sample_start_box(const Formula& f, std::mt19937_64& rng) { return StartBox(f)(rng); }

}  // namespace ulpsolve
