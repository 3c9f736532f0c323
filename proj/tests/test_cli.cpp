#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(PGAIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

const char* kTinySynth = R"({"num_subjects":6,"sequences_per_subject":2,"frames_per_sequence":6,
  "frame_size":[32,22],"seed":3})";

TEST(Cli, UsageErrorsExitWithTwo) {
  const auto dir = pgait::testing::scratch_dir("cli_usage");
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("synth --bogus 1"), 2);
  EXPECT_EQ(run("gradcheck --threads x --out " + q(dir / "g")), 2);
  write(dir / "eval.json", R"({"dataset":"/nonexistent"})");
  EXPECT_EQ(run("eval --config " + q(dir / "eval.json") + " --out " + q(dir / "e")), 2);
  write(dir / "bad.json", R"({"num_subjectz":4})");
  EXPECT_EQ(run("synth --config " + q(dir / "bad.json") + " --out " + q(dir / "s")), 2);
  write(dir / "broken.json", "{not json");
  EXPECT_EQ(run("stats --config " + q(dir / "broken.json") + " --out " + q(dir / "s")), 2);
  write(dir / "ok.json", kTinySynth);
  EXPECT_EQ(run("synth --config " + q(dir / "ok.json")), 2) << "--out is required";
  EXPECT_EQ(run("train --metric cosine --out " + q(dir / "t")), 2) << "--metric is not a train flag";
}

TEST(Cli, RuntimeErrorsExitWithOne) {
  const auto dir = pgait::testing::scratch_dir("cli_runtime");
  write(dir / "stats.json", R"({"dataset":")" + (dir / "missing").string() + R"("})");
  EXPECT_EQ(run("stats --config " + q(dir / "stats.json") + " --out " + q(dir / "o")), 1);
}

TEST(Cli, GradcheckPasses) {
  const auto dir = pgait::testing::scratch_dir("cli_gradcheck");
  ASSERT_EQ(run("gradcheck --out " + q(dir)), 0);
  const auto report = slurp(dir / "gradcheck.json");
  EXPECT_NE(report.find("node_mix"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "effective_config.json"));
}

TEST(Cli, SynthStatsEntropyRender) {
  const auto dir = pgait::testing::scratch_dir("cli_synth");
  write(dir / "synth.json", kTinySynth);
  ASSERT_EQ(run("synth --config " + q(dir / "synth.json") + " --out " + q(dir / "ds")), 0);
  EXPECT_TRUE(fs::exists(dir / "ds" / "manifest.jsonl"));
  write(dir / "d.json", R"({"dataset":")" + (dir / "ds").string() + R"("})");
  ASSERT_EQ(run("stats --config " + q(dir / "d.json") + " --out " + q(dir / "st")), 0);
  EXPECT_NE(slurp(dir / "st" / "stats.json").find("\"total_frames\": 72"), std::string::npos);
  ASSERT_EQ(run("entropy --config " + q(dir / "d.json") + " --out " + q(dir / "en")), 0);
  EXPECT_TRUE(fs::exists(dir / "en" / "entropy.json"));
  write(dir / "r.json", R"({"dataset":")" + (dir / "ds").string() + R"(","sequence":"S000-00","frames":[0,1]})");
  ASSERT_EQ(run("render --config " + q(dir / "r.json") + " --out " + q(dir / "rn")), 0);
  EXPECT_EQ(slurp(dir / "rn" / "S000-00_f001.ppm").substr(0, 3), "P6\n");
}

TEST(Cli, EffectiveConfigReproducesRun) {
  const auto dir = pgait::testing::scratch_dir("cli_repro");
  write(dir / "synth.json", kTinySynth);
  ASSERT_EQ(run("synth --config " + q(dir / "synth.json") + " --seed 11 --out " + q(dir / "a")), 0);
  ASSERT_EQ(run("synth --config " + q(dir / "a" / "effective_config.json") + " --out " + q(dir / "b")), 0);
  EXPECT_EQ(slurp(dir / "a" / "manifest.jsonl"), slurp(dir / "b" / "manifest.jsonl"));
  EXPECT_EQ(slurp(dir / "a" / "split.json"), slurp(dir / "b" / "split.json"));
  EXPECT_EQ(slurp(dir / "a" / "sequences" / "S001-01.gpsq"), slurp(dir / "b" / "sequences" / "S001-01.gpsq"));

  write(dir / "train.json", R"({"dataset":")" + (dir / "a").string() +
                                R"(","model":{"input_size":[32,22],"widths":[4,4,8,8],"hpp_bins":[1,2,4],
        "embedding_dim":8},"train":{"batch_ids":2,"samples_per_id":2,"frames_per_sample":3,"epochs":2,
        "iterations_per_epoch":2}})");
  ASSERT_EQ(run("train --config " + q(dir / "train.json") + " --out " + q(dir / "t1")), 0);
  ASSERT_EQ(run("train --config " + q(dir / "t1" / "effective_config.json") + " --out " + q(dir / "t2")), 0);
  const auto ckpt = slurp(dir / "t1" / "final.pgck");
  EXPECT_FALSE(ckpt.empty());
  EXPECT_EQ(ckpt, slurp(dir / "t2" / "final.pgck"));
  EXPECT_EQ(slurp(dir / "t1" / "loss_history.csv"), slurp(dir / "t2" / "loss_history.csv"));

  write(dir / "eval.json", R"({"dataset":")" + (dir / "a").string() + R"("})");
  ASSERT_EQ(run("eval --config " + q(dir / "eval.json") + " --checkpoint " + q(dir / "t1" / "final.pgck") +
                " --metric cosine --out " + q(dir / "e")),
            0);
  const auto metrics = slurp(dir / "e" / "metrics.json");
  EXPECT_NE(metrics.find("\"rank1\""), std::string::npos);
  EXPECT_NE(metrics.find("cosine"), std::string::npos);
}

}  // namespace
