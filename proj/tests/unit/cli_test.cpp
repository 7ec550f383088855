#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mgmn/cli.hpp"

namespace mgmn {
namespace {

namespace fs = std::filesystem;

const fs::path kFixtures = MGMN_FIXTURE_DIR;

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mgmn_cli_test" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct Outcome {
  int code;
  std::string out;
};

Outcome run_cli(const std::vector<std::string>& args) {
  ::testing::internal::CaptureStdout();
  ::testing::internal::CaptureStderr();
  std::vector<std::string> argv = {"mgmn"};
  argv.insert(argv.end(), args.begin(), args.end());
  const int code = cli::run(argv);
  std::fflush(stdout);
  Outcome o{code, ::testing::internal::GetCapturedStdout()};
  ::testing::internal::GetCapturedStderr();
  return o;
}

TEST(CliGen, SameSeedGivesIdenticalFiles) {
  const fs::path a = fresh_dir("gen_a");
  const fs::path b = fresh_dir("gen_b");
  for (const fs::path& d : {a, b}) {
    ASSERT_EQ(run_cli({"gen", "ged", "--graphs", "12", "--seed", "3", "--out", d.string()}).code, 0);
  }
  for (const char* f : {"graphs.jsonl", "pairs.jsonl", "split.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(CliGen, CreatesMissingOutputDirectory) {
  const fs::path d = fresh_dir("nested") / "deeper" / "data";
  ASSERT_EQ(run_cli({"gen", "clone", "--groups", "5", "--variants", "2", "--out", d.string()}).code, 0);
  EXPECT_TRUE(fs::exists(d / "graphs.jsonl"));
  EXPECT_TRUE(fs::exists(d / "pairs.jsonl"));
  EXPECT_TRUE(fs::exists(d / "split.json"));
  EXPECT_TRUE(fs::exists(d / "manifest.json"));
}

TEST(CliGed, TriangleAgainstPathIsOne) {
  const Outcome o = run_cli({"ged", (kFixtures / "triangle.jsonl").string(), (kFixtures / "path3.jsonl").string(),
                             "--out", fresh_dir("ged1").string()});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("distance 1\n"), std::string::npos) << o.out;
}

TEST(CliGed, GraphAgainstItselfIsZero) {
  const std::string tri = (kFixtures / "triangle.jsonl").string();
  const Outcome o = run_cli({"ged", tri, tri, "--out", fresh_dir("ged0").string()});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("distance 0\n"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("similarity 1\n"), std::string::npos) << o.out;
}

TEST(CliGed, OverBudgetGraphFails) {
  const Outcome o = run_cli({"ged", (kFixtures / "big11.jsonl").string(), (kFixtures / "path3.jsonl").string(),
                             "--out", fresh_dir("ged_big").string()});
  EXPECT_NE(o.code, 0);
}

TEST(CliGed, MissingFileFails) {
  EXPECT_NE(run_cli({"ged", "/nonexistent/a.jsonl", "/nonexistent/b.jsonl", "--out", fresh_dir("ged_missing").string()})
                .code,
            0);
}

TEST(CliTrainEvalScore, EndToEndClassification) {
  const fs::path data = fresh_dir("e2e_data");
  const fs::path run = fresh_dir("e2e_run");
  ASSERT_EQ(run_cli({"gen", "clone", "--groups", "20", "--variants", "2", "--max-nodes", "8", "--out", data.string()})
                .code,
            0);
  ASSERT_EQ(run_cli({"train", "--data", data.string(), "--task", "classification", "--gcn-dim", "8",
                     "--perspectives", "8", "--epochs", "2", "--out", run.string()})
                .code,
            0);
  for (const char* f : {"best.ckpt", "last.ckpt", "train_log.jsonl", "train_report.json", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(run / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(slurp(run / "manifest.json"));
  EXPECT_EQ(manifest.at("command"), "train");
  EXPECT_EQ(manifest.at("status"), "ok");
  EXPECT_TRUE(manifest.contains("code_version"));

  const fs::path eval_dir = fresh_dir("e2e_eval");
  const Outcome e = run_cli({"eval", "--checkpoint", (run / "best.ckpt").string(), "--data", data.string(), "--out",
                             eval_dir.string()});
  EXPECT_EQ(e.code, 0);
  EXPECT_NE(e.out.find("auc"), std::string::npos);
  EXPECT_TRUE(fs::exists(eval_dir / "eval.json"));

  const fs::path graphs = data / "graphs.jsonl";
  const Outcome s = run_cli({"score", "--checkpoint", (run / "best.ckpt").string(), graphs.string(), graphs.string(),
                             "--out", fresh_dir("e2e_score").string()});
  EXPECT_EQ(s.code, 0);
  EXPECT_EQ(s.out, "1.000000\n");
}

TEST(CliTrainEvalScore, RegressionEvalEmitsRankingMetrics) {
  const fs::path data = fresh_dir("reg_data");
  const fs::path run = fresh_dir("reg_run");
  ASSERT_EQ(run_cli({"gen", "ged", "--graphs", "20", "--max-nodes", "6", "--out", data.string()}).code, 0);
  ASSERT_EQ(run_cli({"train", "--data", data.string(), "--task", "regression", "--gcn-dim", "8", "--perspectives",
                     "8", "--iterations", "4", "--batch", "4", "--val-every", "2", "--out", run.string()})
                .code,
            0);
  const fs::path eval_dir = fresh_dir("reg_eval");
  const Outcome e = run_cli({"eval", "--checkpoint", (run / "best.ckpt").string(), "--data", data.string(), "--k",
                             "2,4", "--out", eval_dir.string()});
  EXPECT_EQ(e.code, 0);
  for (const char* name : {"mse", "spearman_rho", "kendall_tau", "p@2", "p@4"}) {
    EXPECT_NE(e.out.find(name), std::string::npos) << name;
  }
}

TEST(CliTrain, UnknownModeIsReportedAsFailure) {
  const fs::path data = fresh_dir("bad_mode_data");
  ASSERT_EQ(run_cli({"gen", "ged", "--graphs", "8", "--out", data.string()}).code, 0);
  EXPECT_NE(run_cli({"train", "--data", data.string(), "--mode", "nope", "--out", fresh_dir("bad_mode").string()}).code,
            0);
}

}  // namespace
}  // namespace mgmn
