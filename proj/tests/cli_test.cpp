#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsubsel/cli.hpp"

namespace fedsubsel {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fedsubsel");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fedsubsel_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv(cli::kSeedEnv);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write_config(const std::string& name, const std::string& body) {
    const auto p = dir_ / name;
    std::ofstream(p) << body;
    return p.string();
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

  fs::path dir_;
};

const char* kSmall = R"({
  "method": "subtrunc", "rounds": 4, "local_steps": 2, "clients_per_round": 3, "sample_size": 4,
  "learning_rate": 0.05, "batch_size": 8, "seed": 11, "lambda": 0.5,
  "dataset": {"kind": "synthetic", "classes": 4, "dims": 5, "per_class": 30, "spread": 2.0},
  "partition": {"clients": 8, "classes_per_client": 2, "train_fraction": 0.8}
})";

TEST_F(CliTest, RepeatProducesOneRowPerSeedAndRound) {
  const auto cfg = write_config("c.json", kSmall);
  const auto r = run_cli({"run", "--config", cfg, "--repeat", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out), 3u * 4 + 1);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), kCsvHeader);
}

TEST_F(CliTest, SameConfigTwiceIsByteIdentical) {
  const auto cfg = write_config("c.json", kSmall);
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", path("a.csv"), "--repeat", "2"}).code, 0);
  ASSERT_EQ(run_cli({"run", "--config", cfg, "--out", path("b.csv"), "--repeat", "2", "--threads", "4"}).code, 0);
  EXPECT_FALSE(read(path("a.csv")).empty());
  EXPECT_EQ(read(path("a.csv")), read(path("b.csv")));
}

// Drops the first CSV column.
std::string strip_method(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(line.find(',')) + "\n";
  return out;
}

TEST_F(CliTest, DivflMatchesSubtruncWithoutFairness) {
  std::string sub = kSmall;
  sub.replace(sub.find("\"lambda\": 0.5"), 13, "\"lambda\": 0.0");
  std::string div = sub;
  div.replace(div.find("\"subtrunc\""), 10, "\"divfl\"");
  const auto a = run_cli({"run", "--config", write_config("s.json", sub)});
  const auto b = run_cli({"run", "--config", write_config("d.json", div)});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_NE(a.out, b.out);
  EXPECT_EQ(strip_method(a.out), strip_method(b.out));
}

TEST_F(CliTest, UnknownKeyIsUsageErrorWithPath) {
  std::string bad = kSmall;
  bad.replace(bad.find("\"kind\": \"synthetic\""), 19, "\"kind\": \"synthetic\", \"colour\": 3");
  const auto r = run_cli({"run", "--config", write_config("bad.json", bad)});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("/dataset/colour"), std::string::npos) << r.err;
}

TEST_F(CliTest, TypeErrorsAndBadJsonAreUsageErrors) {
  EXPECT_EQ(run_cli({"run", "--config", write_config("a.json", R"({"rounds": "ten"})")}).code, 2);
  EXPECT_EQ(run_cli({"run", "--config", write_config("b.json", "{ not json")}).code, 2);
  EXPECT_EQ(run_cli({"run", "--config", path("missing.json")}).code, 2);
  EXPECT_EQ(run_cli({"run"}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
}

TEST_F(CliTest, InfeasibleRunIsRuntimeError) {
  std::string big = kSmall;
  big.replace(big.find("\"clients_per_round\": 3"), 22, "\"clients_per_round\": 9");
  const auto r = run_cli({"run", "--config", write_config("k.json", big)});
  EXPECT_NE(r.code, 0);
}

TEST_F(CliTest, SeedPrecedence) {
  const auto cfg = write_config("c.json", kSmall);
  const auto base = run_cli({"run", "--config", cfg}).out;
  const auto flag = run_cli({"run", "--config", cfg, "--seed", "12"}).out;
  EXPECT_NE(base, flag);
  EXPECT_NE(flag.find("\nsubtrunc,12,0,"), std::string::npos);
  setenv(cli::kSeedEnv, "12", 1);
  EXPECT_EQ(run_cli({"run", "--config", cfg}).out, flag);
  EXPECT_EQ(run_cli({"run", "--config", cfg, "--seed", "11"}).out, base);
  setenv(cli::kSeedEnv, "twelve", 1);
  EXPECT_EQ(run_cli({"run", "--config", cfg}).code, 2);
  unsetenv(cli::kSeedEnv);
}

TEST_F(CliTest, SweepBlockCounts) {
  const auto cfg = write_config("c.json", kSmall);
  const auto lam = run_cli({"sweep", "--config", cfg, "--param", "lambda", "--values", "0.01,0.10,0.25,0.50,0.75,0.95"});
  ASSERT_EQ(lam.code, 0) << lam.err;
  EXPECT_EQ(lines(lam.out), 6u * 4 + 1);
  const auto phi = run_cli({"sweep", "--config", cfg, "--param", "phi", "--values", "identity,log1p"});
  ASSERT_EQ(phi.code, 0) << phi.err;
  EXPECT_EQ(lines(phi.out), 2u * 4 + 1);
  EXPECT_NE(phi.out.find(",identity\n"), std::string::npos);

  std::string uni = kSmall;
  uni.replace(uni.find("\"subtrunc\""), 10, "\"unionfl\"");
  const auto ucfg = write_config("u.json", uni);
  const auto win = run_cli({"sweep", "--config", ucfg, "--param", "window", "--values", "2,5,10"});
  ASSERT_EQ(win.code, 0) << win.err;
  EXPECT_EQ(lines(win.out), 3u * 4 + 1);
}

TEST_F(CliTest, InapplicableSweepIsUsageError) {
  const auto cfg = write_config("c.json", kSmall);
  EXPECT_EQ(run_cli({"sweep", "--config", cfg, "--param", "window", "--values", "2,5"}).code, 2);
  EXPECT_EQ(run_cli({"sweep", "--config", cfg, "--param", "speed", "--values", "2"}).code, 2);
  EXPECT_EQ(run_cli({"sweep", "--config", cfg, "--param", "lambda", "--values", "0.1,oops"}).code, 2);
  std::string uni = kSmall;
  uni.replace(uni.find("\"subtrunc\""), 10, "\"unionfl\"");
  EXPECT_EQ(run_cli({"sweep", "--config", write_config("u.json", uni), "--param", "phi", "--values", "log1p"}).code, 2);
}

TEST_F(CliTest, GenDataRoundTripAndDeterminism) {
  const auto cfg = write_config("g.json", R"({"dataset": {"classes": 2, "dims": 3, "per_class": 2, "seed": 4}})");
  ASSERT_EQ(run_cli({"gen-data", "--config", cfg, "--out", path("a")}).code, 0);
  ASSERT_EQ(run_cli({"gen-data", "--config", cfg, "--out", path("b")}).code, 0);
  const auto img = read_idx(path("a/images-idx3-ubyte"));
  EXPECT_EQ(img.count(), 4u);
  EXPECT_EQ(read(path("a/images-idx3-ubyte")), read(path("b/images-idx3-ubyte")));
  EXPECT_EQ(read(path("a/labels-idx1-ubyte")), read(path("b/labels-idx1-ubyte")));
  const std::string bytes = read(path("a/images-idx3-ubyte"));
  EXPECT_EQ(serialize_idx(img), std::vector<std::uint8_t>(bytes.begin(), bytes.end()));

  // The generated files drive an idx run.
  const std::string idx_cfg = std::string(R"({"rounds": 2, "clients_per_round": 1, "learning_rate": 0.1, "batch_size": 2,
    "dataset": {"kind": "idx", "images": ")") + path("a/images-idx3-ubyte") + R"(", "labels": ")" +
                              path("a/labels-idx1-ubyte") + R"("},
    "partition": {"clients": 1, "classes_per_client": 2, "train_fraction": 0.5}})";
  const auto r = run_cli({"run", "--config", write_config("i.json", idx_cfg)});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out), 3u);
}

TEST_F(CliTest, VerifySuitesPass) {
  for (const char* suite : {"greedy_bound", "partition"}) {
    const auto r = run_cli({"verify", "--suite", suite});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(r.out.rfind("PASS ", 0), 0u) << r.out;
  }
  EXPECT_EQ(run_cli({"verify", "--suite", "nonsense"}).code, 2);
}

TEST_F(CliTest, ScaledLearningRate) {
  std::string t = kSmall;
  t.replace(t.find("\"learning_rate\": 0.05"), 21, "\"learning_rate\": \"scaled\", \"smoothness\": 2.0");
  const auto r = run_cli({"run", "--config", write_config("t.json", t)});
  EXPECT_EQ(r.code, 0) << r.err;
  ExperimentConfig cfg = parse_config_text(t);
  EXPECT_TRUE(cfg.scaled_learning_rate);
  auto clients = build_clients(cfg, cfg.train.seed);
  EXPECT_DOUBLE_EQ(resolve_train_config(cfg, cfg.train.seed, clients).learning_rate, 1.0 / (2.0 * 2.0 * 2.0));
}

TEST(ShippedConfigs, AllParse) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(FEDSUBSEL_CONFIG_DIR)) {
    if (e.path().extension() != ".json" || e.path().filename() == "schema.json") continue;
    std::ifstream in(e.path());
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_NO_THROW(parse_config_text(ss.str())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 5u);
}

}  // namespace
}  // namespace fedsubsel
