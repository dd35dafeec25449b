#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsc/cli.hpp"
#include "tsc/models.hpp"
#include "tsc/optim.hpp"
#include "tsc/rng.hpp"

namespace fs = std::filesystem;
using tsc::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

// Two-class archive pair: class 2 carries a bump in the middle.
void write_ucr(const fs::path& path, std::size_t n, std::size_t t, std::uint64_t seed) {
  tsc::Rng rng(seed);
  std::ofstream o(path);
  for (std::size_t i = 0; i < n; ++i) {
    const int cls = int(i % 2) + 1;
    o << cls;
    for (std::size_t j = 0; j < t; ++j) {
      const double bump = (cls == 2 && j > t / 3 && j < 2 * t / 3) ? 1.5 : 0.0;
      o << '\t' << bump + rng.uniform(-0.5, 0.5);
    }
    o << '\n';
  }
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("tsc_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write_ucr(dir_ / "Toy_TRAIN.tsv", 12, 40, 1);
    write_ucr(dir_ / "Toy_TEST.tsv", 10, 40, 2);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string p(const std::string& rel) const { return (dir_ / rel).string(); }

  Outcome train(const std::string& arch, const std::string& out, const std::string& runs = "1") {
    return invoke({"train", "--arch", arch, "--train", p("Toy_TRAIN.tsv"), "--test", p("Toy_TEST.tsv"), "--runs", runs,
                   "--seed", "3", "--epochs", "2", "--out", p(out)});
  }

  fs::path dir_;
};

std::string without_time(const std::string& csv) {
  std::string out;
  for (const auto& l : lines_of(csv)) out += l.substr(0, l.rfind(',')) + "\n";
  return out;
}

}  // namespace

TEST_F(CliTest, TrainWritesResultsLogsAndModels) {
  const auto r = train("fcn", "o", "2");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines_of(slurp(p("o/results.csv")));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "dataset,architecture,seed,accuracy,loss,train_seconds");
  EXPECT_EQ(rows[1].rfind("Toy,fcn,3,", 0), 0u) << rows[1];
  EXPECT_NE(r.out.find("mean accuracy"), std::string::npos);
  std::size_t models = 0, logs = 0;
  for (const auto& e : fs::recursive_directory_iterator(p("o"))) {
    if (e.path().extension() == ".model") ++models;
    if (e.path().extension() == ".csv" && e.path().parent_path().filename() == "fcn") ++logs;
  }
  EXPECT_EQ(models, 2u);
  EXPECT_EQ(logs, 2u);
}

TEST_F(CliTest, TrainIsDeterministic) {
  ASSERT_EQ(train("fcn,timecnn", "a").code, 0);
  ASSERT_EQ(train("fcn,timecnn", "b").code, 0);
  EXPECT_EQ(without_time(slurp(p("a/results.csv"))), without_time(slurp(p("b/results.csv"))));
  std::size_t blobs = 0;
  for (const auto& e : fs::recursive_directory_iterator(p("a"))) {
    if (!e.is_regular_file() || e.path().extension() != ".bin") continue;
    const fs::path twin = fs::path(p("b")) / fs::relative(e.path(), p("a"));
    ASSERT_TRUE(fs::exists(twin)) << twin;
    EXPECT_EQ(slurp(e.path()), slurp(twin)) << e.path();
    ++blobs;
  }
  EXPECT_EQ(blobs, 2u);
}

TEST_F(CliTest, RerunReplacesRowsInsteadOfDuplicating) {
  ASSERT_EQ(train("timecnn", "o").code, 0);
  ASSERT_EQ(train("timecnn", "o").code, 0);
  EXPECT_EQ(lines_of(slurp(p("o/results.csv"))).size(), 2u);
}

TEST_F(CliTest, OutDirFallsBackToEnvironment) {
  ::setenv("TSC_OUT_DIR", p("env_out").c_str(), 1);
  EXPECT_EQ(tsc::cli::default_out_dir(), p("env_out"));
  const auto r = invoke({"train", "--arch", "timecnn", "--train", p("Toy_TRAIN.tsv"), "--test", p("Toy_TEST.tsv"),
                         "--runs", "1", "--epochs", "1"});
  ::unsetenv("TSC_OUT_DIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(p("env_out/results.csv")));
  EXPECT_EQ(tsc::cli::default_out_dir(), "tsc_out");
}

TEST_F(CliTest, ManifestRecordsEpochCount) {
  ASSERT_EQ(train("fcn", "o").code, 0);
  fs::path manifest;
  for (const auto& e : fs::recursive_directory_iterator(p("o")))
    if (e.path().extension() == ".model") manifest = e.path();
  EXPECT_NE(slurp(manifest).find("epochs=2"), std::string::npos);
  // without --epochs the FCN default applies
  EXPECT_EQ(tsc::optim::default_config(tsc::models::Architecture::fcn).epochs, 2000u);
}

TEST_F(CliTest, McnnOnShortSeriesFails) {
  write_ucr(dir_ / "Short_TRAIN.tsv", 8, 10, 5);
  write_ucr(dir_ / "Short_TEST.tsv", 6, 10, 6);
  const auto r = invoke({"train", "--arch", "mcnn", "--train", p("Short_TRAIN.tsv"), "--test", p("Short_TEST.tsv"),
                         "--runs", "1", "--epochs", "1", "--out", p("o")});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("slice"), std::string::npos) << r.err;
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(invoke({}).code, tsc::cli::usage);
  EXPECT_EQ(invoke({"frobnicate"}).code, tsc::cli::usage);
  EXPECT_EQ(invoke({"train", "--arch", "fcn"}).code, tsc::cli::usage);
  EXPECT_EQ(invoke({"train", "--arch", "lstm", "--train", p("Toy_TRAIN.tsv"), "--test", p("Toy_TEST.tsv")}).code,
            tsc::cli::usage);
  EXPECT_EQ(invoke({"train", "--arch", "fcn", "--train", p("Toy_TRAIN.tsv"), "--test", p("Toy_TEST.tsv"), "--runs",
                    "0"})
                .code,
            tsc::cli::usage);
}

TEST_F(CliTest, MissingInputIsDataError) {
  const auto r = invoke({"train", "--arch", "fcn", "--train", p("nope.tsv"), "--test", p("Toy_TEST.tsv")});
  EXPECT_EQ(r.code, tsc::cli::data_error);
  EXPECT_FALSE(r.err.empty());
}

namespace {
void write_baseline(const fs::path& path, const std::vector<std::string>& rows) {
  std::ofstream o(path);
  o << "dataset,classifier,accuracy\n";
  for (const auto& r : rows) o << r << '\n';
}
}  // namespace

TEST_F(CliTest, CompareTwoClassifiersSkipsFriedman) {
  write_baseline(dir_ / "r.csv", {"d1,A,0.9", "d1,B,0.8", "d2,A,0.7", "d2,B,0.75", "d3,A,0.6", "d3,B,0.5"});
  const auto r = invoke({"compare", "--results", p("r.csv"), "--out", p("cd.svg")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("friedman skipped"), std::string::npos);
  EXPECT_NE(r.out.find("pair A B"), std::string::npos);
  EXPECT_TRUE(fs::exists(p("cd.svg")));
  EXPECT_EQ(slurp(p("cd.txt")), r.out);
}

TEST_F(CliTest, CompareIdenticalColumnsFormOneClique) {
  std::vector<std::string> rows;
  for (int d = 0; d < 5; ++d)
    for (const char* c : {"A", "B", "C"}) rows.push_back("d" + std::to_string(d) + "," + c + ",0." + std::to_string(d + 3));
  write_baseline(dir_ / "r.csv", rows);
  const auto r = invoke({"compare", "--results", p("r.csv"), "--out", p("cd.svg")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("friedman statistic=0 p=1 reject=no"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("clique A B C\n"), std::string::npos) << r.out;
  std::size_t cliques = 0;
  for (const auto& l : lines_of(r.out)) cliques += l.rfind("clique", 0) == 0;
  EXPECT_EQ(cliques, 1u);
}

TEST_F(CliTest, CompareMissingCellListsPairs) {
  write_baseline(dir_ / "r.csv", {"d1,A,0.9", "d1,B,0.8", "d1,C,0.7", "d2,A,0.7", "d2,C,0.75", "d3,A,0.6", "d3,B,0.5",
                                  "d3,C,0.4"});
  const auto r = invoke({"compare", "--results", p("r.csv"), "--out", p("cd.svg")});
  EXPECT_EQ(r.code, tsc::cli::data_error);
  EXPECT_NE(r.err.find("(d2, B)"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(p("cd.svg")));
}

TEST_F(CliTest, CamAndMdsOnFcn) {
  ASSERT_EQ(train("fcn", "o").code, 0);
  fs::path model;
  for (const auto& e : fs::recursive_directory_iterator(p("o")))
    if (e.path().extension() == ".model") model = e.path();

  auto r = invoke({"cam", "--model", model.string(), "--data", p("Toy_TEST.tsv"), "--class", "1", "--out", p("cam1")});
  ASSERT_EQ(r.code, 0) << r.err;
  r = invoke({"cam", "--model", model.string(), "--data", p("Toy_TEST.tsv"), "--class", "1", "--out", p("cam2")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (int i = 0; i < 10; ++i) {
    const std::string name = "cam_" + std::to_string(i);
    ASSERT_TRUE(fs::exists(p("cam1/" + name + ".svg")));
    EXPECT_EQ(slurp(p("cam1/" + name + ".svg")), slurp(p("cam2/" + name + ".svg")));
    EXPECT_EQ(lines_of(slurp(p("cam1/" + name + ".csv"))).size(), 41u);
  }

  r = invoke({"cam", "--model", model.string(), "--data", p("Toy_TEST.tsv"), "--class", "7", "--out", p("cam3")});
  EXPECT_NE(r.code, 0);

  r = invoke({"mds", "--model", model.string(), "--data", p("Toy_TEST.tsv"), "--out", p("mds")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines_of(slurp(p("mds/mds.csv")));
  ASSERT_EQ(rows.size(), 11u);  // header + one row per test series
  EXPECT_EQ(rows[0], "x,y,label");
  EXPECT_TRUE(fs::exists(p("mds/mds.svg")));
}

TEST_F(CliTest, CamRefusesNonGapModels) {
  for (const char* arch : {"tlenet", "timecnn"}) {
    ASSERT_EQ(train(arch, arch).code, 0);
    fs::path model;
    for (const auto& e : fs::recursive_directory_iterator(p(arch)))
      if (e.path().extension() == ".model") model = e.path();
    const auto r = invoke({"cam", "--model", model.string(), "--data", p("Toy_TEST.tsv"), "--class", "0"});
    EXPECT_EQ(r.code, tsc::cli::usage) << arch;
    EXPECT_NE(r.err.find("GAP"), std::string::npos) << r.err;
    const auto m = invoke({"mds", "--model", model.string(), "--data", p("Toy_TEST.tsv")});
    EXPECT_EQ(m.code, tsc::cli::usage) << arch;
  }
}
