#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <ulpsolve/ulpsolve.hpp>

#include "checks.hpp"

namespace fs = std::filesystem;
using namespace ulpsolve;

namespace {

constexpr int kExitDecided = 0;
constexpr int kExitError = 1;
constexpr int kExitTimeout = 2;

struct EngineFlags {
  double timeout_s = 1200.0;
  std::uint64_t seed = 0;
  int starts = 1;
  int restarts = 10;
  int hops1 = 30;
  int hops2 = 10;
  int hops3 = 10;
  int s3_bound = 8;
  bool parallel = false;

  void attach(CLI::App& app) {
    app.add_option("--timeout", timeout_s, "Wall-clock budget per instance in seconds")->check(CLI::NonNegativeNumber);
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--starts", starts, "S1 starts per restart")->check(CLI::PositiveNumber);
    app.add_option("--restarts", restarts, "Outer restarts")->check(CLI::PositiveNumber);
    app.add_option("--hops1", hops1, "Basin hops for S1")->check(CLI::NonNegativeNumber);
    app.add_option("--hops2", hops2, "Basin hops for S2")->check(CLI::NonNegativeNumber);
    app.add_option("--hops3", hops3, "Lattice refinement hops for S3")->check(CLI::NonNegativeNumber);
    app.add_option("--s3-bound", s3_bound, "Per-coordinate ULP radius of S3")->check(CLI::NonNegativeNumber);
    app.add_flag("--parallel", parallel, "Run S1 starts on all cores (verdicts stay sound, models may vary)");
  }

  EngineConfig config(const Ablation& ablation) const {
    EngineConfig c;
    c.time_budget = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_s));
    c.seed = seed;
    c.n_start_over = restarts;
    c.stage1.n_restarts = starts;
    c.stage1.hops = hops1;
    c.stage2.hops = hops2;
    c.stage3.hops = hops3;
    c.stage3.s3_bound = s3_bound;
    c.parallel = parallel;
    c.ablation = ablation;
    return c;
  }
};

void print_stats(const Verdict& v, std::ostream& os) {
  os << "restart,stage,value,exact_zero,evaluations,time_s,status\n";
  for (const auto& s : v.stage_trace) {
    os << s.restart << ',' << stage_name(s.stage) << ',' << s.value << ',' << s.exact_zero << ',' << s.evaluations << ','
       << std::chrono::duration<double>(s.elapsed).count() << ',' << status_name(s.status) << '\n';
  }
}

int cmd_solve(const std::string& file, const EngineFlags& flags, const std::string& ablation_list, bool stats,
              bool verbose, const std::string& model_out) {
  Formula f;
  EngineConfig cfg;
  try {
    cfg = flags.config(parse_ablation(ablation_list));
    f = parse(bench::read_file(file));
  } catch (const std::exception& e) {
    std::cout << "error" << std::endl;
    std::cerr << file << ": " << e.what() << std::endl;
    return kExitError;
  }
  const Verdict v = solve(f, cfg);
  std::cout << verdict_name(v.kind) << '\n';
  if (v.kind == VerdictKind::Sat) {
    const auto model = model_string(f, *v.model);
    std::cout << model << '\n';
    if (!model_out.empty()) {
      std::ofstream out(model_out);
      if (!(out << model << '\n')) {
        std::cerr << "cannot write model to '" << model_out << "'" << std::endl;
        return kExitError;
      }
    }
  }
  if (v.kind == VerdictKind::UnsatGuess && verbose) std::cout << "score " << *v.score << '\n';
  std::cout.flush();
  if (stats) print_stats(v, std::cerr);
  return v.kind == VerdictKind::Timeout ? kExitTimeout : kExitDecided;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!(out << text)) throw std::runtime_error("cannot write '" + path.string() + "'");
}

int cmd_bench(const std::string& dir, const std::string& expected_path, const EngineFlags& flags,
              const std::string& ablation_list, bool study, int repeats, int jobs, const std::string& out_dir) {
  try {
    const auto cfg = flags.config(parse_ablation(ablation_list));
    const auto files = bench::list_instances(dir);
    std::map<std::string, bench::Expected> expected;
    const bool has_expected = !expected_path.empty();
    if (has_expected) {
      std::ifstream in(expected_path);
      if (!in) throw std::runtime_error("cannot read '" + expected_path + "'");
      expected = bench::read_expected_csv(in);
    }
    fs::create_directories(out_dir);
    const double cap_s = flags.timeout_s;

    const auto runs = bench::run_suite(files, cfg, repeats, jobs);
    std::ostringstream runs_csv;
    bench::write_runs_csv(runs_csv, runs);
    write_text(fs::path(out_dir) / "runs.csv", runs_csv.str());

    const auto outcomes = bench::aggregate_repeats(runs, cap_s);
    if (has_expected) bench::check_soundness(outcomes, expected);
    std::size_t uncovered = 0;
    const auto summary = bench::summarize(outcomes, cap_s, has_expected ? &expected : nullptr, &uncovered);
    if (has_expected && uncovered > 0)
      std::cerr << "warning: " << uncovered << " instance(s) have no expected status; recall covers the rest\n";
    std::ostringstream summary_csv;
    bench::write_summary_csv(summary_csv, summary);
    write_text(fs::path(out_dir) / "summary.csv", summary_csv.str());
    std::cout << summary_csv.str();

    if (study) {
      const auto rows = bench::run_ablation_study(files, cfg, repeats, jobs, has_expected ? &expected : nullptr);
      std::ostringstream ablation_csv;
      bench::write_ablation_csv(ablation_csv, rows);
      write_text(fs::path(out_dir) / "ablation.csv", ablation_csv.str());
      std::cout << ablation_csv.str();
    }
  } catch (const bench::SoundnessViolation& e) {
    std::cerr << "soundness violation: " << e.what() << std::endl;
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitError;
  }
  return kExitDecided;
}

int cmd_selftest(const std::string& filter, std::uint64_t seed, const std::string& corpus) {
  const auto selected = checks::matching(filter);
  if (selected.empty()) {
    std::cerr << "no check matches '" << filter << "'" << std::endl;
    return kExitError;
  }
  checks::Context ctx;
  ctx.seed = seed;
  ctx.corpus_dir = corpus;
  const int failures = checks::run_and_report(selected, ctx, std::cout);
  std::cout << selected.size() - static_cast<std::size_t>(failures) << '/' << selected.size() << " passed" << std::endl;
  return failures == 0 ? kExitDecided : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ulpsolve: QF_FP satisfiability by staged numerical optimization"};
  app.require_subcommand(1);

  auto* solve_cmd = app.add_subcommand("solve", "Decide one SMT-LIB file");
  std::string file;
  EngineFlags solve_flags;
  std::string solve_ablation;
  bool stats = false;
  bool verbose = false;
  std::string model_out;
  solve_cmd->add_option("file", file, "SMT-LIB 2 input")->required()->check(CLI::ExistingFile);
  solve_flags.attach(*solve_cmd);
  solve_cmd->add_option("--ablation", solve_ablation, "Comma-separated: no_s1,no_s3,no_projection,absolute_residuals,no_clause_product");
  solve_cmd->add_flag("--stats", stats, "Print the per-stage trace as CSV on stderr");
  solve_cmd->add_flag("--verbose", verbose, "Print the unsat-guess score");
  solve_cmd->add_option("--model-out", model_out, "Also write the model block to this file");

  auto* bench_cmd = app.add_subcommand("bench", "Run every .smt2 file in a directory");
  std::string dir;
  std::string expected;
  EngineFlags bench_flags;
  std::string bench_ablation;
  bool study = false;
  int repeats = 1;
  int jobs = 1;
  std::string out_dir = ".";
  bench_cmd->add_option("dir", dir, "Directory of .smt2 files")->required()->check(CLI::ExistingDirectory);
  bench_cmd->add_option("--expected", expected, "CSV of path,status (sat|unsat)")->check(CLI::ExistingFile);
  bench_flags.attach(*bench_cmd);
  bench_cmd->add_option("--variant", bench_ablation, "Ablation flags applied to the main run");
  bench_cmd->add_flag("--ablation", study, "Also run the full pipeline and each single ablation; writes ablation.csv");
  bench_cmd->add_option("--repeats", repeats, "Runs per file")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", out_dir, "Directory for runs.csv, summary.csv and ablation.csv");

  auto* self_cmd = app.add_subcommand("selftest", "Run the bundled property checks and corpus");
  std::string filter;
  std::uint64_t self_seed = checks::Context{}.seed;
  std::string corpus = ULPSOLVE_CORPUS_DIR;
  self_cmd->add_option("--filter", filter, "Only checks whose name or module contains this text");
  self_cmd->add_option("--seed", self_seed, "Seed for generated instances");
  self_cmd->add_option("--corpus", corpus, "Corpus directory with expected.csv");

  CLI11_PARSE(app, argc, argv);

  if (*solve_cmd) return cmd_solve(file, solve_flags, solve_ablation, stats, verbose, model_out);
  if (*bench_cmd) return cmd_bench(dir, expected, bench_flags, bench_ablation, study, repeats, jobs, out_dir);
  return cmd_selftest(filter, self_seed, corpus);
}
