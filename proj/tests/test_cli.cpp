#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"
#include "brl/cli.hpp"

namespace {

const std::string kSamples = BRL_SAMPLES_DIR;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "brl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = brl::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string sample(const std::string& name) { return kSamples + "/" + name; }

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty() && l[0] != '#') lines.push_back(l);
  return lines;
}

}  // namespace

TEST(Cli, BetaCsvHasCommentHeaderAndRows) {
  const Outcome r = run({"beta", "--domain", sample("ellipse.json"), "--q-max", "6"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("# brl beta\n", 0), 0u);
  EXPECT_NE(r.out.find("# config_hash: "), std::string::npos);
  const auto lines = data_lines(r.out);
  ASSERT_EQ(lines.size(), 6u);
  EXPECT_EQ(lines[0], "p,q,omega,beta,perimeter");
  EXPECT_EQ(lines[1], "1,2,0.5,-4,8");
}

TEST(Cli, OrbitRowCount) {
  const Outcome r = run({"orbit", "--domain", sample("ellipse.json"), "--phi", "0.7", "--steps", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(data_lines(r.out).size(), 12u);
}

TEST(Cli, OperatorJsonFields) {
  const Outcome r = run({"operator", "--what", "dirichlet", "--q0", "2", "--modes", "40"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  for (const char* k : {"sigma_min", "sigma_max", "cond", "stable_under_doubling", "kernel_dim"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["kernel_dim"], 0);
}

TEST(Cli, RigidityJsonFieldsAndVerdict) {
  const Outcome r = run({"rigidity", "--domain", sample("ellipse.json"), "--q0", "2", "--candidate", sample("candidate.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  for (const char* k : {"head_residuals", "tail_residual_norm", "recovered_error", "sigma_min", "verdict"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["verdict"], "excluded");
  EXPECT_LT(j["recovered_error"].get<double>(), 1e-6);
}

TEST(Cli, DeterministicBytesAcrossRunsAndThreads) {
  const std::vector<std::string> args = {"beta", "--domain", sample("ellipse.json"), "--q-max", "12", "--all-p"};
  const Outcome a = run(args), b = run(args);
  auto threaded = args;
  threaded.insert(threaded.begin(), {"--threads", "2"});
  const Outcome c = run(threaded);
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  // the thread count is not part of the recorded configuration
  EXPECT_EQ(a.out, c.out);
}

TEST(Cli, OutputFileOption) {
  const auto path = std::filesystem::temp_directory_path() / "brl_cli_test_out.csv";
  const Outcome r = run({"-o", path.string(), "lazutkin", "--domain", sample("ellipse.json"), "--points", "8"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(data_lines(ss.str()).size(), 9u);
  std::filesystem::remove(path);
}

TEST(Cli, ValidationFailuresExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  const Outcome unknown = run({"bogus"});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({"beta", "--domain", sample("bad_domain.json")}).code, 2);
  EXPECT_EQ(run({"beta", "--domain", sample("missing.json")}).code, 2);
  EXPECT_EQ(run({"orbit", "--domain", sample("ellipse.json")}).code, 2);  // --phi is required
  EXPECT_EQ(run({"operator", "--domain", sample("circle.json"), "--what", "T", "--q0", "2"}).code, 2);
  EXPECT_EQ(run({"--threads", "-1", "beta", "--domain", sample("ellipse.json")}).code, 2);
}

TEST(Cli, NumericalFailureExitsThree) {
  const Outcome r = run({"operator", "--domain", sample("ellipse.json"), "--what", "T", "--q0", "4", "--j-search-max", "2"});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("numerical failure"), std::string::npos);
}

TEST(Cli, LogLevelFromEnvironment) {
  const std::vector<std::string> args = {"beta", "--domain", sample("ellipse.json"), "--q-max", "3"};
  ::setenv("BRL_LOG", "0", 1);
  EXPECT_TRUE(run(args).err.empty());
  ::setenv("BRL_LOG", "2", 1);
  EXPECT_NE(run(args).err.find("config"), std::string::npos);
  ::setenv("BRL_LOG", "9", 1);
  EXPECT_EQ(run(args).code, 2);
  ::unsetenv("BRL_LOG");
  EXPECT_EQ(run(args).code, 0);
}

TEST(Cli, HelpExitsZero) {
  const Outcome r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("rigidity"), std::string::npos);
}
