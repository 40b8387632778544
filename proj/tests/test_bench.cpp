#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <ulpsolve/bench.hpp>

using namespace ulpsolve;
using namespace ulpsolve::bench;
using namespace std::chrono_literals;

namespace {

InstanceOutcome outcome(std::string path, RunVerdict v, double t) { return {std::move(path), v, t}; }

RunRecord record(std::string path, int run, RunVerdict v, double t) {
  RunRecord r;
  r.path = std::move(path);
  r.run = run;
  r.verdict = v;
  r.time_s = t;
  return r;
}

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("ulpsolve_bench_" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

 private:
  std::filesystem::path path_;
};

EngineConfig quick() {
  EngineConfig c;
  c.time_budget = 10s;
  c.n_start_over = 2;
  c.stage1.n_restarts = 2;
  c.stage1.hops = 4;
  c.stage2.hops = 4;
  c.stage3.hops = 2;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Summary, TimeoutRateOfFortyNine) {
  std::vector<InstanceOutcome> xs;
  for (int i = 0; i < 49; ++i) xs.push_back(outcome("f" + std::to_string(i), i < 4 ? RunVerdict::Timeout : RunVerdict::Sat, 1.0));
  const auto s = summarize(xs, 1200.0);
  EXPECT_EQ(s.n, 49u);
  EXPECT_EQ(s.n_timeout, 4u);
  EXPECT_DOUBLE_EQ(s.timeout_rate, 4.0 / 49.0);
  EXPECT_NEAR(s.timeout_rate, 0.082, 0.0005);
}

TEST(Summary, TimeoutsCountAtTheCap) {
  const std::vector<InstanceOutcome> xs{outcome("a", RunVerdict::Sat, 2.0), outcome("b", RunVerdict::Timeout, 3.5),
                                        outcome("c", RunVerdict::UnsatGuess, 4.0)};
  const auto s = summarize(xs, 1200.0);
  EXPECT_DOUBLE_EQ(s.mean_time_s, (2.0 + 1200.0 + 4.0) / 3.0);
  EXPECT_DOUBLE_EQ(s.median_time_s, 4.0);
  EXPECT_EQ(s.n_sat + s.n_unsat_guess + s.n_timeout + s.n_error, s.n);
  EXPECT_FALSE(s.sat_recall);
}

TEST(Summary, LowerMedian) {
  EXPECT_EQ(lower_median({4, 1, 3, 2}), 2.0);
  EXPECT_EQ(lower_median({5, 1, 3}), 3.0);
  EXPECT_EQ(lower_median({7}), 7.0);
  EXPECT_EQ(lower_median({}), 0.0);
}

TEST(Summary, RecallOverCoveredSatInstances) {
  const std::vector<InstanceOutcome> xs{outcome("dir/a.smt2", RunVerdict::Sat, 1), outcome("dir/b.smt2", RunVerdict::UnsatGuess, 1),
                                        outcome("dir/c.smt2", RunVerdict::UnsatGuess, 1), outcome("dir/d.smt2", RunVerdict::Sat, 1)};
  const std::map<std::string, Expected> truth{{"a.smt2", Expected::Sat}, {"dir/b.smt2", Expected::Sat}, {"c.smt2", Expected::Unsat}};
  std::size_t uncovered = 0;
  const auto s = summarize(xs, 10, &truth, &uncovered);
  ASSERT_TRUE(s.sat_recall);
  EXPECT_DOUBLE_EQ(*s.sat_recall, 0.5);
  EXPECT_EQ(uncovered, 1u);
  const std::map<std::string, Expected> all_found{{"a.smt2", Expected::Sat}, {"d.smt2", Expected::Sat}};
  EXPECT_DOUBLE_EQ(*summarize(xs, 10, &all_found).sat_recall, 1.0);
}

TEST(Summary, SoundnessTripwire) {
  const std::vector<InstanceOutcome> xs{outcome("x.smt2", RunVerdict::Sat, 1)};
  EXPECT_THROW(check_soundness(xs, {{"x.smt2", Expected::Unsat}}), SoundnessViolation);
  EXPECT_NO_THROW(check_soundness(xs, {{"x.smt2", Expected::Sat}}));
  EXPECT_NO_THROW(check_soundness(xs, {}));
}

TEST(Repeats, AnySatWinsAndTimeIsMeanOfDecided) {
  const std::vector<RunRecord> runs{record("a", 0, RunVerdict::Timeout, 9), record("a", 1, RunVerdict::Sat, 2),
                                    record("a", 2, RunVerdict::Sat, 4), record("b", 0, RunVerdict::Timeout, 9),
                                    record("b", 1, RunVerdict::Timeout, 9), record("c", 0, RunVerdict::UnsatGuess, 3),
                                    record("c", 1, RunVerdict::Timeout, 9)};
  const auto out = aggregate_repeats(runs, 100.0);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].verdict, RunVerdict::Sat);
  EXPECT_DOUBLE_EQ(out[0].time_s, 3.0);
  EXPECT_EQ(out[1].verdict, RunVerdict::Timeout);
  EXPECT_DOUBLE_EQ(out[1].time_s, 100.0);
  EXPECT_EQ(out[2].verdict, RunVerdict::UnsatGuess);
  EXPECT_DOUBLE_EQ(out[2].time_s, 3.0);
}

TEST(Csv, SummarySchema) {
  std::ostringstream os;
  SuiteSummary s;
  s.n = 2;
  s.n_sat = 1;
  s.n_timeout = 1;
  s.timeout_rate = 0.5;
  write_summary_csv(os, s);
  EXPECT_EQ(os.str(),
            "n,n_sat,n_unsat_guess,n_timeout,n_error,sat_recall,timeout_rate,mean_time_s,median_time_s\n"
            "2,1,0,1,0,,0.500000,0.000000,0.000000\n");
}

TEST(Csv, RunsSchemaAndQuoting) {
  std::ostringstream os;
  auto r = record("we,ird \"name\".smt2", 1, RunVerdict::UnsatGuess, 0.25);
  r.seed = 42;
  write_runs_csv(os, {r});
  EXPECT_EQ(os.str(), "path,run,verdict,time,seed\n\"we,ird \"\"name\"\".smt2\",1,unsat-guess,0.250000,42\n");
}

TEST(Csv, ReadExpected) {
  std::istringstream is("path,status\r\na.smt2,sat\n\n# note\n\"b,c.smt2\",unsat\n");
  const auto m = read_expected_csv(is);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("a.smt2"), Expected::Sat);
  EXPECT_EQ(m.at("b,c.smt2"), Expected::Unsat);
  std::istringstream bad("a.smt2,maybe\n");
  EXPECT_THROW(read_expected_csv(bad), std::runtime_error);
}

TEST(Csv, AblationSchema) {
  std::ostringstream os;
  write_ablation_csv(os, {{"full", SuiteSummary{}, {}}});
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), kAblationHeader);
  const auto variants = ablation_variants();
  ASSERT_EQ(variants.size(), 6u);
  EXPECT_EQ(variants[0].first, "full");
  EXPECT_FALSE(variants[0].second.any());
  for (std::size_t i = 1; i < variants.size(); ++i) EXPECT_TRUE(variants[i].second.any());
}

TEST(Digest, StableAndSensitive) {
  EXPECT_EQ(digest(""), "cbf29ce484222325");
  EXPECT_EQ(digest("a"), "af63dc4c8601ec8c");
  auto c = quick();
  const auto d0 = digest(describe(c));
  c.stage2.hops += 1;
  EXPECT_NE(digest(describe(c)), d0);
}

TEST(Suite, RunsFilesAndValidatesModels) {
  TempDir dir;
  dir.write("b_unsat.smt2", "(declare-fun x () Float64) (assert (fp.lt x x))");
  dir.write("a_sat.smt2", "(declare-fun x () Float64) (assert (fp.gt x ((_ to_fp 11 53) RNE 3.0)))");
  dir.write("c_bad.smt2", "(declare-fun x () Float64) (assert (fp.sqrt RNE x))");
  dir.write("notes.txt", "ignored");
  const auto files = list_instances(dir.path());
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(basename_of(files[0]), "a_sat.smt2");
  const auto runs = run_suite(files, quick(), 2, 3);
  ASSERT_EQ(runs.size(), 6u);
  EXPECT_EQ(runs[0].verdict, RunVerdict::Sat);
  ASSERT_TRUE(runs[0].model_text);
  EXPECT_NE(runs[0].model_text->find("define-fun x"), std::string::npos);
  EXPECT_EQ(runs[1].run, 1);
  EXPECT_EQ(runs[0].seed, 5u);
  EXPECT_EQ(runs[1].seed, run_seed(5, 1));
  EXPECT_EQ(runs[2].verdict, RunVerdict::UnsatGuess);
  EXPECT_EQ(runs[4].verdict, RunVerdict::Error);
  for (const auto& r : runs) EXPECT_GE(r.time_s, 0.0);
  const auto s = summarize(aggregate_repeats(runs, 10.0), 10.0);
  EXPECT_EQ(s.n, 3u);
  EXPECT_EQ(s.n_sat, 1u);
  EXPECT_EQ(s.n_unsat_guess, 1u);
  EXPECT_EQ(s.n_error, 1u);
}

TEST(Suite, ParallelMatchesSequential) {
  TempDir dir;
  for (int i = 0; i < 4; ++i)
    dir.write("f" + std::to_string(i) + ".smt2", "(declare-fun x () Float64) (assert (fp.gt x ((_ to_fp 11 53) RNE " +
                                                     std::to_string(i) + ".5)))");
  const auto files = list_instances(dir.path());
  const auto seq = run_suite(files, quick(), 1, 1);
  const auto par = run_suite(files, quick(), 1, 4);
  ASSERT_EQ(seq.size(), par.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    EXPECT_EQ(seq[i].path, par[i].path);
    EXPECT_EQ(seq[i].verdict, par[i].verdict);
    EXPECT_EQ(seq[i].model_text, par[i].model_text);
  }
}
