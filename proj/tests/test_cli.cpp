#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace kmemir::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("kmemir_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string synth(const std::string& name, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"synth", "--out", path(name)};
    args.insert(args.end(), extra.begin(), extra.end());
    const Outcome r = run_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return path(name) + "/dataset.csv";
  }

  fs::path dir_;
};

const std::vector<std::string> kFastFirstStage = {"--first-stage", "ridge", "--ridge-penalty", "1e-8"};

TEST_F(CliTest, SynthIsDeterministic) {
  const Outcome a = run_cli({"synth", "--bags", "12", "--seed", "4"});
  const Outcome b = run_cli({"synth", "--bags", "12", "--seed", "4"});
  const Outcome c = run_cli({"synth", "--bags", "12", "--seed", "5"});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(a.out.rfind("bag_id,label,f1,f2,f3\n", 0), 0u);

  const std::string file = synth("s", {"--bags", "12", "--seed", "4"});
  EXPECT_EQ(slurp(file), a.out);
  EXPECT_TRUE(fs::exists(path("s/manifest.json")));
}

TEST_F(CliTest, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run_cli({"synth", "--bags", "0"}).code, 2);
  EXPECT_EQ(run_cli({"synth", "--min-instances", "5", "--max-instances", "2"}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  const std::string data = synth("d", {"--bags", "10"});
  EXPECT_EQ(run_cli({"cv", "--data", data, "--algorithm", "kme-rbf", "--theta", "0"}).code, 2);
  EXPECT_EQ(run_cli({"cv", "--data", data, "--algorithm", "nope"}).code, 2);
  EXPECT_EQ(run_cli({"cv", "--data", data, "--threads", "0"}).code, 2);
}

TEST_F(CliTest, MalformedCsvExitsWithThreeAndNamesTheLine) {
  std::ofstream(path("bad.csv")) << "bag_id,label,f0\na,1.0,0.5\na,1.0\n";
  const Outcome r = run_cli({"cv", "--data", path("bad.csv")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("bad.csv:3"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"cv", "--data", path("missing.csv")}).code, 1);
}

TEST_F(CliTest, SynthPipesIntoCrossValidation) {
  const std::string cli = KMEMIR_CLI_PATH;
  const std::string cmd = cli + " synth --bags 30 --noise-scale 0 --seed 2 | " + cli +
                          " cv --data - --first-stage ridge --ridge-penalty 1e-10 --repetitions 1 --out " +
                          path("piped") + " > " + path("piped.txt") + " 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0) << slurp(path("piped.txt"));
  const auto doc = nlohmann::json::parse(slurp(path("piped/result.json")));
  EXPECT_LT(doc.at("results").at(0).at("mean_rmse").get<double>(), 1e-3);
}

TEST_F(CliTest, CrossValidationReportsAllAlgorithms) {
  const std::string data = synth("d", {"--bags", "40", "--seed", "3"});
  std::vector<std::string> args = {"cv",          "--data",          data,         "--algorithm", "instance-mean",
                                   "--algorithm", "instance-median", "--algorithm", "kme-rbf",     "--algorithm",
                                   "label-mean",  "--theta",         "1",          "--lambda",    "1e30",
                                   "--repetitions", "2",             "-D",         "5",           "--out",
                                   path("cv")};
  args.insert(args.end(), kFastFirstStage.begin(), kFastFirstStage.end());
  const Outcome r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("Instance-MIR (mean)"), std::string::npos) << r.out;
  const auto doc = nlohmann::json::parse(slurp(path("cv/result.json")));
  ASSERT_EQ(doc.at("results").size(), 4u);
  // With an enormous lambda every kme prediction collapses to zero.
  const double kme = doc["results"][2]["mean_rmse"].get<double>();
  const auto labels = load_canonical_csv(data).labels();
  EXPECT_GT(kme, 0.5 * std::sqrt(labels.squaredNorm() / static_cast<double>(labels.size())));
  EXPECT_LT(doc["results"][0]["mean_rmse"].get<double>(), doc["results"][3]["mean_rmse"].get<double>());
}

TEST_F(CliTest, RepeatedRunsWriteIdenticalArtifacts) {
  const std::string data = synth("d", {"--bags", "20", "--seed", "6"});
  for (const char* name : {"a", "b"}) {
    const Outcome r = run_cli({"cv", "--data", data, "--algorithm", "kme-inv", "--theta", "2", "--hidden", "4",
                           "--epochs", "3", "--repetitions", "1", "-D", "3", "--out", path(name)});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(path("a/result.json")), slurp(path("b/result.json")));
  EXPECT_EQ(slurp(path("a/manifest.json")), slurp(path("b/manifest.json")));
}

TEST_F(CliTest, DefaultGridHas224Rows) {
  const std::string data = synth("d", {"--bags", "15", "--seed", "7"});
  std::vector<std::string> args = {"grid", "--data", data, "--repetitions", "1", "--outer-folds", "3",
                                   "-D", "3", "--out", path("g")};
  args.insert(args.end(), kFastFirstStage.begin(), kFastFirstStage.end());
  const Outcome r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = slurp(path("g/grid.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 225);
  const auto doc = nlohmann::json::parse(slurp(path("g/result.json")));
  EXPECT_EQ(doc.at("grid_points"), 224);
}

TEST_F(CliTest, SinglePointGrid) {
  const std::string data = synth("d", {"--bags", "15", "--seed", "8"});
  std::vector<std::string> args = {"grid", "--data", data, "--thetas", "1", "--lambdas", "0.01",
                                   "--repetitions", "1", "-D", "3", "--out", path("g")};
  args.insert(args.end(), kFastFirstStage.begin(), kFastFirstStage.end());
  const Outcome r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = nlohmann::json::parse(slurp(path("g/result.json")));
  EXPECT_EQ(doc["best"]["theta"], 1.0);
  EXPECT_EQ(doc["best"]["lambda"], 0.01);
}

TEST_F(CliTest, InterruptedGridResumesToIdenticalOutput) {
  const std::string data = synth("d", {"--bags", "15", "--seed", "9"});
  std::vector<std::string> base = {"grid", "--data", data, "--thetas", "0.5,1,2", "--lambdas", "0.1,0.01,0.001",
                                   "--repetitions", "2", "--outer-folds", "3", "-D", "3"};
  base.insert(base.end(), kFastFirstStage.begin(), kFastFirstStage.end());

  auto full = base;
  full.insert(full.end(), {"--out", path("full")});
  ASSERT_EQ(run_cli(full).code, 0);

  auto partial = base;
  partial.insert(partial.end(), {"--out", path("part"), "--stop-after-cells", "4"});
  const Outcome stopped = run_cli(partial);
  EXPECT_EQ(stopped.code, 5) << stopped.err;
  EXPECT_FALSE(fs::exists(path("part/result.json")));

  const Outcome resumed = run_cli({"rerun", path("part/manifest.json"), "--resume"});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_NE(resumed.out.find("resuming: 4 of 9"), std::string::npos) << resumed.out;
  for (const char* f : {"grid.csv", "result.json", "cells.jsonl", "manifest.json"}) {
    EXPECT_EQ(slurp(path(std::string("part/") + f)), slurp(path(std::string("full/") + f))) << f;
  }

  // A ledger from a different configuration is refused.
  auto other = base;
  other.insert(other.end(), {"--out", path("part"), "--resume", "--seed", "99"});
  EXPECT_EQ(run_cli(other).code, 2);
}

TEST_F(CliTest, RerunIsThreadIndependent) {
  const std::string data = synth("d", {"--bags", "20", "--seed", "10"});
  const Outcome first = run_cli({"cv", "--data", data, "--algorithm", "kme-rbf", "--algorithm", "instance-mean",
                             "--hidden", "4", "--epochs", "3", "--repetitions", "2", "-D", "4", "--theta", "1",
                             "--out", path("one")});
  ASSERT_EQ(first.code, 0) << first.err;
  const Outcome eight = run_cli({"rerun", path("one/manifest.json"), "--out", path("eight"), "--threads", "8"});
  ASSERT_EQ(eight.code, 0) << eight.err;
  EXPECT_EQ(slurp(path("one/result.json")), slurp(path("eight/result.json")));
  EXPECT_EQ(slurp(path("one/manifest.json")), slurp(path("eight/manifest.json")));
}

TEST_F(CliTest, StackThenPredictMatchesDirectPredict) {
  const std::string train = synth("t", {"--bags", "20", "--seed", "11"});
  const std::string held = synth("h", {"--bags", "6", "--seed", "12"});
  std::vector<std::string> common = {"-D", "4", "--seed", "3"};
  common.insert(common.end(), kFastFirstStage.begin(), kFastFirstStage.end());

  auto stack_args = std::vector<std::string>{"stack", "--data", train, "--out", path("st")};
  stack_args.insert(stack_args.end(), common.begin(), common.end());
  ASSERT_EQ(run_cli(stack_args).code, 0);

  auto direct = std::vector<std::string>{"predict", "--train", train, "--heldout", held, "--theta", "1",
                                         "--out", path("p1")};
  direct.insert(direct.end(), common.begin(), common.end());
  auto reused = std::vector<std::string>{"predict", "--train", train, "--heldout", held, "--theta", "1", "--stacked", path("st/stacked.csv"),
            "--out", path("p2")};
  reused.insert(reused.end(), common.begin(), common.end());
  ASSERT_EQ(run_cli(direct).code, 0);
  const Outcome r = run_cli(reused);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(path("p1/predictions.csv")), slurp(path("p2/predictions.csv")));
  EXPECT_EQ(slurp(path("p1/model.json")), slurp(path("p2/model.json")));
}

TEST_F(CliTest, ZeroNoiseInstanceMeanIsExact) {
  const std::string train = synth("t", {"--bags", "30", "--noise-scale", "0", "--seed", "13"});
  const std::string held = synth("h", {"--bags", "10", "--noise-scale", "0", "--seed", "14"});
  auto args = std::vector<std::string>{"predict", "--train", train, "--heldout", held, "--algorithm", "instance-mean",
                                       "--out", path("p")};
  args.insert(args.end(), kFastFirstStage.begin(), kFastFirstStage.end());
  const Outcome r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pos = r.out.find("rmse on held-out labels: ");
  ASSERT_NE(pos, std::string::npos) << r.out;
  EXPECT_LT(std::stod(r.out.substr(pos + 25)), 1e-3);
}

}  // namespace
}  // namespace kmemir::cli
