#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Cli : ::testing::Test {
  fs::path dir;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("slim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path write(const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return dir / name;
  }

  int slim(const std::string& args) {
    const std::string cmd = std::string(SLIM_CLI_PATH) + " " + args + " > " +
                            (dir / "stdout.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

const char* kSmall = R"(
[problem]
m = 100
n = 5
blocks = 10
[run]
epochs = 2
replicates = 2
[theory]
k_max = 30
)";

}  // namespace

TEST_F(Cli, RunWritesCsvs) {
  auto cfg = write("a.cfg", kSmall);
  EXPECT_EQ(slim("run " + cfg.string() + " -o " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out_metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "out_aggregate.csv"));
}

TEST_F(Cli, SweepStreamTheoryAndGen) {
  auto cfg = write("a.cfg", std::string(kSmall) + "[sweep]\nalpha = 0.1, 1\n");
  const std::string out = " -o " + (dir / "o").string();
  EXPECT_EQ(slim("sweep --axis alpha " + cfg.string() + out), 0);
  EXPECT_TRUE(fs::exists(dir / "o_sweep_alpha.csv"));
  EXPECT_EQ(slim("stream " + cfg.string() + out), 0);
  EXPECT_TRUE(fs::exists(dir / "o_stream.csv"));
  EXPECT_EQ(slim("verify-theory " + cfg.string() + out), 0);
  EXPECT_TRUE(fs::exists(dir / "o_theory.csv"));
  EXPECT_EQ(slim("gen-problem " + cfg.string() + out), 0);
  EXPECT_TRUE(fs::exists(dir / "o.slim"));
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(slim("--help"), 0);
  EXPECT_EQ(slim(""), 1);
  EXPECT_EQ(slim("frobnicate"), 1);
  EXPECT_EQ(slim("run " + (dir / "missing.cfg").string()), 1);
  auto bad = write("bad.cfg", "[solver]\nalhpa = 1\n");
  EXPECT_EQ(slim("run " + bad.string()), 1);
  auto diverge = write("d.cfg", std::string(kSmall) + "[solver]\nmethod = sg\nalpha = 100\n");
  EXPECT_EQ(slim("run " + diverge.string() + " -o " + (dir / "d").string()), 2);
  // 5-row blocks in 10 unknowns: the rank-based contraction bound is not < 1.
  auto deficient = write("t.cfg", "[problem]\nm = 100\nn = 10\nblocks = 20\n[theory]\nk_max = 10\n");
  EXPECT_EQ(slim("verify-theory " + deficient.string() + " -o " + (dir / "t").string()), 3);
}
