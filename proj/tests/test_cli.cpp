#include <gtest/gtest.h>

#include <cstdlib>
#include <string>
#include <sys/wait.h>

#include "test_util.hpp"

using sdmlp::testing::read_bytes;
using sdmlp::testing::read_lines;
using sdmlp::testing::TempDir;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args, const TempDir& scratch) {
  const auto out = scratch / "stdout.txt";
  const auto err = scratch / "stderr.txt";
  const std::string cmd = std::string("'") + SDMLP_CLI_PATH + "' " + args + " >'" + out.string() +
                          "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_bytes(out);
  r.err = read_bytes(err);
  return r;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

class CliTest : public ::testing::Test {
protected:
  TempDir dir{"cli"};
  std::string p(const std::string& name) const { return "'" + (dir / name).string() + "'"; }

  void make_data(const std::string& extra = "") {
    const auto r = run_cli("synth --frames 5 --size 12x8 --seed 3 --out " + p("data") + " " + extra,
                           dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
  void make_model() {
    const auto r = run_cli("train --data-dir " + p("data") +
                               " --train-frames 2 --epochs 2 --batch-size 32 --seed 42 --out " +
                               p("m.sdmlp") + " --losses " + p("losses.csv"),
                           dir);
    ASSERT_EQ(r.exit_code, 0) << r.err;
  }
};

} // namespace

TEST_F(CliTest, SynthWritesFramesAndPrintsGenerator) {
  const auto r = run_cli("synth --frames 3 --size 10x4 --seed 9 --out " + p("data"), dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(contains(r.out, "A0="));
  EXPECT_TRUE(contains(r.out, "c="));
  EXPECT_TRUE(contains(r.out, "frames=3"));
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "left_000002.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "right_000000.png"));
  EXPECT_EQ(std::filesystem::file_size(dir / "data" / "depth_000001.xyz"), 10u * 4 * 12);
}

TEST_F(CliTest, SynthRejectsZeroSize) {
  const auto r = run_cli("synth --size 0x4 --out " + p("data"), dir);
  EXPECT_EQ(r.exit_code, 2);
}

TEST_F(CliTest, TrainWritesCheckpointAndLosses) {
  make_data();
  make_model();
  EXPECT_TRUE(std::filesystem::exists(dir / "m.sdmlp"));
  const auto lines = read_lines(dir / "losses.csv");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "epoch,mse,l2,wall_ms");
  EXPECT_EQ(lines[1].substr(0, 2), "1,");
}

TEST_F(CliTest, TrainPrintsFinalMseAndIsRepeatable) {
  make_data();
  const std::string args = "train --data-dir " + p("data") +
                           " --train-frames 2 --epochs 1 --batch-size 16 --seed 5 --losses ";
  const auto a = run_cli(args + p("a.csv") + " --out " + p("a.sdmlp"), dir);
  const auto b = run_cli(args + p("b.csv") + " --out " + p("b.sdmlp"), dir);
  ASSERT_EQ(a.exit_code, 0) << a.err;
  ASSERT_EQ(b.exit_code, 0) << b.err;
  EXPECT_TRUE(contains(a.out, "final_mse="));
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(read_bytes(dir / "a.csv"), read_bytes(dir / "b.csv"));
  EXPECT_EQ(read_bytes(dir / "a.sdmlp"), read_bytes(dir / "b.sdmlp"));
}

TEST_F(CliTest, TrainOnExplicitIndices) {
  make_data();
  const auto r = run_cli("train --data-dir " + p("data") +
                             " --train-indices 1,3 --epochs 1 --out " + p("m.sdmlp") +
                             " --losses " + p("l.csv"),
                         dir);
  EXPECT_EQ(r.exit_code, 0) << r.err;
}

TEST_F(CliTest, ParseErrorsExitTwoWithUsage) {
  const auto unknown = run_cli("train --bogus", dir);
  EXPECT_EQ(unknown.exit_code, 2);
  EXPECT_TRUE(contains(unknown.err, "Usage") || contains(unknown.err, "usage")) << unknown.err;

  const auto missing = run_cli("train --data-dir x", dir);
  EXPECT_EQ(missing.exit_code, 2);

  const auto none = run_cli("", dir);
  EXPECT_EQ(none.exit_code, 2);
}

TEST_F(CliTest, TrainOnMissingDataExitsOne) {
  const auto r = run_cli("train --data-dir " + p("nothing") + " --out " + p("m") + " --losses " +
                             p("l.csv"),
                         dir);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_TRUE(contains(r.err, "error"));
}

TEST_F(CliTest, EvaluateEmitsRecordsMeanAndHistogram) {
  make_data();
  make_model();
  const auto r = run_cli("evaluate --data-dir " + p("data") + " --train-frames 2 --model " +
                             p("m.sdmlp") + " --records " + p("rec.csv") + " --hist " +
                             p("hist.csv"),
                         dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(contains(r.out, "mean_rmse="));
  EXPECT_TRUE(contains(r.out, "mean_rmse_conventional="));
  const auto rec = read_lines(dir / "rec.csv");
  ASSERT_EQ(rec.size(), 5u); // header, 3 test frames, mean
  EXPECT_EQ(rec[1].substr(0, 2), "2,");
  EXPECT_EQ(rec.back().substr(0, 5), "mean,");
  EXPECT_EQ(read_lines(dir / "hist.csv").size(), 21u);
}

TEST_F(CliTest, ConventionalRmseSwitchesReportedMetric) {
  make_data();
  make_model();
  const std::string base = "evaluate --data-dir " + p("data") + " --train-frames 2 --model " +
                           p("m.sdmlp") + " --hist " + p("h.csv") + " --bins 4";
  const auto a = run_cli(base + " --records " + p("a.csv"), dir);
  const auto b = run_cli(base + " --records " + p("b.csv") + " --conventional-rmse", dir);
  ASSERT_EQ(a.exit_code, 0) << a.err;
  ASSERT_EQ(b.exit_code, 0) << b.err;
  EXPECT_NE(read_bytes(dir / "a.csv"), read_bytes(dir / "b.csv"));
  EXPECT_EQ(read_lines(dir / "h.csv").size(), 5u);
}

TEST_F(CliTest, EvaluateWithMissingCheckpointExitsOne) {
  make_data();
  const auto r = run_cli("evaluate --data-dir " + p("data") + " --model " + p("absent.sdmlp"),
                         dir);
  EXPECT_EQ(r.exit_code, 1);
}

TEST_F(CliTest, PredictWritesBothClouds) {
  make_data("--invalid-fraction 0.25");
  make_model();
  const auto r = run_cli("predict --data-dir " + p("data") + " --model " + p("m.sdmlp") +
                             " --frame 4 --out-ply " + p("p.ply") + " --gt-ply " + p("g.ply") +
                             " --depth-png " + p("z.png"),
                         dir);
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(contains(r.out, "points=96"));
  EXPECT_EQ(read_lines(dir / "p.ply")[2], "element vertex 96");
  EXPECT_EQ(read_lines(dir / "g.ply")[2], "element vertex 72");
  EXPECT_TRUE(std::filesystem::exists(dir / "z.png"));

  const auto masked = run_cli("predict --data-dir " + p("data") + " --model " + p("m.sdmlp") +
                                  " --frame 4 --mask-by-gt --out-ply " + p("pm.ply"),
                              dir);
  ASSERT_EQ(masked.exit_code, 0) << masked.err;
  EXPECT_EQ(read_lines(dir / "pm.ply")[2], "element vertex 72");
}

TEST_F(CliTest, PredictOutOfRangeFrameExitsOne) {
  make_data();
  make_model();
  const auto r = run_cli("predict --data-dir " + p("data") + " --model " + p("m.sdmlp") +
                             " --frame 100 --out-ply " + p("p.ply"),
                         dir);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_FALSE(std::filesystem::exists(dir / "p.ply"));
}

TEST_F(CliTest, GradcheckPassesAndSabotageFails) {
  const auto ok = run_cli("gradcheck --seed 1", dir);
  EXPECT_EQ(ok.exit_code, 0) << ok.out << ok.err;
  EXPECT_TRUE(contains(ok.out, "max_rel_err="));
  const auto bad = run_cli("gradcheck --seed 1 --sabotage", dir);
  EXPECT_EQ(bad.exit_code, 1);
}
