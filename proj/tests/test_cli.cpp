// Drives the freeharm binary through the shell and inspects exit codes and reports.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("freeharm_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }

  /// Runs `freeharm <args>`, storing stdout in `out_` and returning the exit code.
  int run(const std::string& args, const std::string& env = "") {
    const std::string so = path("stdout.txt"), se = path("stderr.txt");
    const std::string cmd = env + " '" FREEHARM_CLI "' " + args + " >'" + so + "' 2>'" + se + "'";
    const int status = std::system(cmd.c_str());
    out_ = slurp(so);
    err_ = slurp(se);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static void write(const std::string& name, const json& j) { std::ofstream(path(name)) << j.dump(); }

  json report() const { return json::parse(out_); }

  /// d = 1 function on B_2 with the value c on each generator and 0 on length two.
  static json scalar_on_generators(double c, std::size_t r = 2) {
    json entries = json::array();
    auto v = [](double x) { return json::array({json::array({json::array({x, 0.0})})}); };
    entries.push_back({{"word", ""}, {"m", v(1.0)}});
    for (const char* w : {"a", "b"}) entries.push_back({{"word", w}, {"m", v(c)}});
    if (r >= 2)
      for (const char* w : {"aa", "ab", "aB", "ba", "bb", "Ab"})
        entries.push_back({{"word", w}, {"m", v(0.0)}});
    return {{"schema", "freeharm/1"}, {"d", 1}, {"r", r}, {"entries", entries}};
  }

  std::string out_, err_;
  static fs::path dir_;
};

fs::path Cli::dir_;

}  // namespace

TEST_F(Cli, GenNspdPassesCheck) {
  ASSERT_EQ(run("gen --kind nspd --r 2 --d 2 --seed 1 --out " + path("c.json")), 0) << err_;
  ASSERT_EQ(run("check --in " + path("c.json")), 0) << err_;
  const json rep = report();
  EXPECT_EQ(rep["schema"], "freeharm/1");
  EXPECT_EQ(rep["result"]["status"], "strict");
  EXPECT_EQ(rep["result"]["gram_radius"], 1);
  EXPECT_TRUE(rep["failures"].empty());
  EXPECT_TRUE(rep.contains("version"));
  EXPECT_TRUE(rep["timings"].contains("verdict"));
  EXPECT_EQ(rep["config"]["command"], "check");
}

TEST_F(Cli, GenIsByteIdentical) {
  for (const std::string kind : {"nspd", "perturbed", "tensor"}) {
    ASSERT_EQ(run("gen --kind " + kind + " --d 2 --seed 5 --out " + path("g1.json")), 0) << err_;
    ASSERT_EQ(run("gen --kind " + kind + " --d 2 --seed 5 --out " + path("g2.json")), 0) << err_;
    EXPECT_EQ(slurp(path("g1.json")), slurp(path("g2.json"))) << kind;
    ASSERT_EQ(run("gen --kind " + kind + " --d 2 --seed 6 --out " + path("g3.json")), 0) << err_;
    EXPECT_NE(slurp(path("g1.json")), slurp(path("g3.json"))) << kind;
  }
}

TEST_F(Cli, GenTensorHasZeroDelta) {
  ASSERT_EQ(run("gen --kind tensor --d 3 --m 2 --seed 1"), 0) << err_;
  const json inst = report();
  EXPECT_EQ(inst["delta"], 0.0);
  EXPECT_EQ(inst["kind"], "tensor_exact");
  EXPECT_EQ(inst["N"], 6);
}

TEST_F(Cli, CheckVerdicts) {
  ASSERT_EQ(run("gen --kind delta --r 2 --d 1 --out " + path("delta.json")), 0);
  ASSERT_EQ(run("check --in " + path("delta.json")), 0);
  EXPECT_EQ(report()["result"]["status"], "strict");
  write("star.json", scalar_on_generators(0.5));
  ASSERT_EQ(run("check --in " + path("star.json")), 0) << err_;
  EXPECT_EQ(report()["result"]["status"], "semidefinite");
  json two = scalar_on_generators(0.0);
  two["entries"][1]["m"] = json::array({json::array({json::array({2.0, 0.0})})});
  write("two.json", two);
  ASSERT_EQ(run("check --in " + path("two.json")), 1);
  EXPECT_EQ(report()["result"]["status"], "indefinite");
  EXPECT_EQ(report()["failures"], json::array({"indefinite"}));
}

TEST_F(Cli, InputErrorsExitTwo) {
  std::ofstream(path("garbage.json")) << "{not json";
  EXPECT_EQ(run("check --in " + path("garbage.json")), 2);
  EXPECT_EQ(run("check --in " + path("missing.json")), 2);
  json unnorm = scalar_on_generators(0.1);
  unnorm["entries"][0]["m"] = json::array({json::array({json::array({3.0, 0.0})})});
  write("unnorm.json", unnorm);
  EXPECT_EQ(run("check --in " + path("unnorm.json")), 2);
  EXPECT_NE(err_.find("'e'"), std::string::npos) << err_;
  EXPECT_EQ(run("gen --kind nspd --bogus 1"), 2);
  EXPECT_EQ(run("gen --kind nspd --d 0"), 2);
  EXPECT_EQ(run("gen --kind nspd --eps 1.5"), 2);
  EXPECT_EQ(run("gen --kind nspd --d 3 --N 2"), 2);
  EXPECT_EQ(run("gen --kind simplex"), 2);
  EXPECT_EQ(run("gen --kind tensor --d 6"), 2);
  EXPECT_EQ(run("gen --kind nspd --r two"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run(""), 2);
  ASSERT_EQ(run("gen --kind delta --r 2 --d 1 --out " + path("d2.json")), 0);
  EXPECT_EQ(run("extend --in " + path("d2.json") + " --R 2"), 2);
  EXPECT_EQ(run("extend --in " + path("d2.json") + " --R 4 --method simplex"), 2);
  EXPECT_EQ(run("extend --in " + path("d2.json")), 2);
  EXPECT_EQ(run("pipeline --r 1 --quadrature pade"), 2);
  EXPECT_EQ(run("energy --in " + path("d2.json") + " --in " + path("d2.json") + " --r 2"), 2);
}

TEST_F(Cli, HelpAndVersion) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(out_.find("pipeline"), std::string::npos);
  EXPECT_EQ(run("--version"), 0);
  EXPECT_NE(out_.find("1.0.0"), std::string::npos);
}

TEST_F(Cli, ExtendDelta) {
  ASSERT_EQ(run("gen --kind delta --r 2 --d 2 --out " + path("d22.json")), 0);
  ASSERT_EQ(run("extend --in " + path("d22.json") + " --R 4 --out " + path("ext.json")), 0) << err_;
  const json rep = json::parse(slurp(path("ext.json")));
  EXPECT_EQ(rep["status"], "ok");
  EXPECT_EQ(rep["result"]["residual"], 0.0);
  EXPECT_EQ(rep["result"]["extended"]["r"], 4);
  EXPECT_TRUE(rep["certification"]["restriction_exact"].get<bool>());
  EXPECT_EQ(rep["config"]["R"], 4);
  ASSERT_EQ(run("extend --in " + path("d22.json") + " --R 3 --method central"), 0) << err_;
  EXPECT_EQ(report()["result"]["method"], "central");
}

TEST_F(Cli, NonConvergenceExitsThree) {
  write("hard.json", scalar_on_generators(0.45));
  ASSERT_EQ(run("extend --in " + path("hard.json") + " --R 4 --max-iter 3"), 3) << err_;
  const json rep = report();
  EXPECT_EQ(rep["status"], "infeasible-numerically");
  EXPECT_EQ(rep["failures"], json::array({"non_convergence"}));
  EXPECT_GT(rep["result"]["residual"].get<double>(), 1e-8);
  ASSERT_EQ(run("gain --in " + path("hard.json") + " --in " + path("hard.json") + " --R 4 --max-iter 3"), 3);
  ASSERT_EQ(run("extend --in " + path("hard.json") + " --R 4"), 0) << err_;
}

TEST_F(Cli, PositivityErrorsExitOne) {
  write("semi.json", scalar_on_generators(0.5));
  EXPECT_EQ(run("extend --in " + path("semi.json") + " --R 4"), 1);
  EXPECT_EQ(run("energy --in " + path("semi.json") + " --in " + path("semi.json")), 1);
}

TEST_F(Cli, GainIdenticalAndCsv) {
  ASSERT_EQ(run("gen --kind nspd --r 2 --d 1 --seed 3 --out " + path("n1.json")), 0);
  ASSERT_EQ(run("gain --in " + path("n1.json") + " " + path("n1.json") + " --R 4 --workers 2"), 0) << err_;
  const json rep = report();
  for (const auto& row : rep["result"]["gain"])
    for (const auto& v : row) EXPECT_LE(std::abs(v.get<double>()), 1e-10);
  EXPECT_TRUE(rep["failures"].empty());
  ASSERT_EQ(run("gain --in " + path("n1.json") + " --in " + path("n1.json") + " --R 4 --method central --out " +
                path("gain.csv")),
            0);
  const std::string csv = slurp(path("gain.csv"));
  EXPECT_EQ(csv.rfind("m,k,before,after,gain\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_EQ(report()["command"], "gain");
}

TEST_F(Cli, EnergyOfSelfIsOne) {
  ASSERT_EQ(run("gen --kind nspd --r 2 --d 2 --seed 8 --out " + path("e.json")), 0);
  ASSERT_EQ(run("energy --in " + path("e.json") + " --in " + path("e.json")), 0) << err_;
  EXPECT_NEAR(report()["result"]["energy"].get<double>(), 1.0, 1e-10);
}

TEST_F(Cli, PipelineTensor) {
  ASSERT_EQ(run("pipeline --kind tensor --d 3 --m 2 --eps 0.05 --r 1 --seed 1"), 0) << err_;
  const json rep = report();
  EXPECT_LE(rep["result"]["max_element_error"].get<double>(), 0.25);
  EXPECT_EQ(rep["result"]["matrix_elements"].size(), 25u);
  EXPECT_TRUE(rep["failures"].empty());
  EXPECT_TRUE(rep["timings"].contains("diagnostics"));
}

TEST_F(Cli, PipelineFromFileWithContour) {
  ASSERT_EQ(run("gen --kind perturbed --d 2 --m 2 --delta 1e-3 --seed 2 --out " + path("inst.json")), 0) << err_;
  ASSERT_EQ(run("pipeline --in " + path("inst.json") + " --r 1 --quadrature contour"), 0) << err_;
  const json rep = report();
  EXPECT_FALSE(rep["result"]["repair_budget_condition"].get<bool>());
  EXPECT_EQ(rep["config"]["quadrature"], "contour");
}

TEST_F(Cli, PipelineGroupRing) {
  ASSERT_EQ(run("pipeline --kind tensor --d 2 --m 2 --r 2 --seed 4"), 0) << err_;
  const json rep = report();
  ASSERT_EQ(rep["group_ring"].size(), 10u);
  for (const auto& g : rep["group_ring"]) EXPECT_TRUE(g["holds"].get<bool>());
}

TEST_F(Cli, LoggingGoesToStderr) {
  ASSERT_EQ(run("gen --kind delta --r 1 --d 1", "FREEHARM_LOG=info"), 0);
  EXPECT_NE(err_.find("gen delta"), std::string::npos) << err_;
  EXPECT_NO_THROW(json::parse(out_));
  ASSERT_EQ(run("gen --kind delta --r 1 --d 1"), 0);
  EXPECT_TRUE(err_.empty()) << err_;
}
