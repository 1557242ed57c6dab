#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "xmodal/dataset.hpp"
#include "xmodal/model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = xmodal::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("xmodal_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST(CliHelp, MatchesGoldenFiles) {
  const bool update = std::getenv("XMODAL_UPDATE_GOLDEN") != nullptr;
  for (const std::string sub : {"", "ingest", "split", "train", "tune", "index-build", "query", "eval",
                                "serve", "project2d", "synth"}) {
    const auto r = sub.empty() ? run({"--help"}) : run({sub, "--help"});
    EXPECT_EQ(r.code, 0) << sub;
    const fs::path golden = fs::path(XMODAL_GOLDEN_DIR) / ("help_" + (sub.empty() ? "main" : sub) + ".txt");
    if (update) {
      std::ofstream(golden, std::ios::binary) << r.out;
      continue;
    }
    ASSERT_TRUE(fs::exists(golden)) << golden;
    EXPECT_EQ(r.out, slurp(golden)) << sub;
  }
}

TEST(CliHelp, TrainDefaultsAreVisible) {
  const auto r = run({"train", "--help"});
  for (const std::string flag : {"--epochs UINT [20]", "--batch UINT [128]", "--lr-backbone FLOAT [1e-05]",
                                 "--lr-head FLOAT [0.0001]", "--warmup-frac FLOAT [0.1]",
                                 "--lambda1 FLOAT [0.69]", "--lambda2 FLOAT [1.97]",
                                 "--lambda3 FLOAT [0.46]", "--tau FLOAT [0.07]", "--dropout FLOAT [0.1]"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
  const auto s = run({"split", "--help"});
  EXPECT_NE(s.out.find("--test-per-class UINT [200]"), std::string::npos);
  EXPECT_NE(s.out.find("--val-frac FLOAT [0.1]"), std::string::npos);
  EXPECT_NE(run({"serve", "--help"}).out.find("[127.0.0.1:8080]"), std::string::npos);
}

TEST(CliUsage, ErrorsExitOne) {
  for (const std::vector<std::string>& args :
       std::vector<std::vector<std::string>>{{},
                                             {"nonsense"},
                                             {"synth", "--out"},
                                             {"synth", "--bogus", "1", "--out", "x"},
                                             {"synth", "--n", "abc", "--out", "x"},
                                             {"train", "--train", "a"}}) {
    const auto r = run(args);
    EXPECT_EQ(r.code, 1) << ::testing::PrintToString(args);
    EXPECT_NE(r.err.find("Usage: xmodal"), std::string::npos) << r.err;
    EXPECT_TRUE(r.out.empty());
  }
}

TEST_F(CliTest, FlagsAreValidatedBeforeFiles) {
  // None of these paths exist; a usage error must win over the missing file.
  EXPECT_EQ(run({"query", "--index", path("none"), "--embeddings", path("none"), "--id", "a",
                 "--modality", "audio"}).code, 1);
  EXPECT_EQ(run({"query", "--index", path("none"), "--embeddings", path("none"), "--id", "a", "--k", "0"}).code, 1);
  EXPECT_EQ(run({"split", "--in", path("none"), "--out-dir", path("o"), "--val-frac", "1"}).code, 1);
  EXPECT_EQ(run({"train", "--train", path("none"), "--val", path("none"), "--out", path("m"), "--batch", "1"}).code, 1);
  EXPECT_EQ(run({"tune", "--train", path("none"), "--val", path("none"), "--strategy", "grid"}).code, 1);
  EXPECT_EQ(run({"serve", "--index", path("none"), "--bind", "nohost"}).code, 1);
  EXPECT_EQ(run({"eval", "--index", path("none"), "--queries", path("none"), "--direction", "up"}).code, 1);
  EXPECT_EQ(run({"project2d", "--embeddings", path("none"), "--space", "audio"}).code, 1);
  EXPECT_EQ(run({"synth", "--n", "0", "--out", path("s")}).code, 1);
  EXPECT_FALSE(fs::exists(path("s")));
}

TEST_F(CliTest, DataErrorsExitTwo) {
  const auto missing = run({"index-build", "--embeddings", path("none.cmxe"), "--out", path("x.cmxi")});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("error"), std::string::npos);
  std::ofstream(path("junk.cmxe")) << "not an embedding file";
  EXPECT_EQ(run({"index-build", "--embeddings", path("junk.cmxe"), "--out", path("x.cmxi")}).code, 2);
}

TEST_F(CliTest, SynthTrainZeroEpochsGivesIdentityAdapters) {
  ASSERT_EQ(run({"synth", "--n", "200", "--dim", "16", "--seed", "7", "--out", path("s.cmxe")}).code, 0);
  const auto r = run({"train", "--train", path("s.cmxe"), "--val", path("s.cmxe"), "--epochs", "0",
                      "--out", path("m.cmxm")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const auto p = xmodal::load_params(path("m.cmxm"));
  EXPECT_EQ(p.image_adapter.weight, xmodal::Matrix::identity(16));
  EXPECT_EQ(p.text_adapter.weight, xmodal::Matrix::identity(16));
  EXPECT_EQ(p.image_adapter.bias, xmodal::Vector(16, 0.0));
}

TEST_F(CliTest, EvalOnIdenticalModalitiesIsPerfectAtOne) {
  ASSERT_EQ(run({"synth", "--n", "50", "--dim", "8", "--identical-modalities", "--out", path("s.cmxe")}).code, 0);
  ASSERT_EQ(run({"index-build", "--embeddings", path("s.cmxe"), "--out", path("s.cmxi")}).code, 0);
  const auto r = run({"eval", "--index", path("s.cmxi"), "--queries", path("s.cmxe"), "--k", "1,5",
                      "--json", path("r.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  bool found = false;
  for (const auto& l : lines(r.out)) {
    if (l.rfind("Accuracy@1 ", 0) == 0) {
      found = true;
      EXPECT_NE(l.find("1.000          1.000"), std::string::npos) << l;
    }
  }
  EXPECT_TRUE(found) << r.out;
  const auto j = json::parse(slurp(path("r.json")));
  ASSERT_EQ(j["reports"].size(), 2u);
  EXPECT_EQ(j["reports"][0]["at_k"][0]["accuracy"], 1.0);
  EXPECT_EQ(j["reports"][1]["at_k"][0]["accuracy"], 1.0);
}

TEST_F(CliTest, QueryFindsSelfAndReportsMissing) {
  ASSERT_EQ(run({"synth", "--n", "30", "--dim", "8", "--out", path("s.cmxe")}).code, 0);
  ASSERT_EQ(run({"index-build", "--embeddings", path("s.cmxe"), "--out", path("s.cmxi")}).code, 0);
  const auto hit = run({"query", "--index", path("s.cmxi"), "--embeddings", path("s.cmxe"), "--id", "SYN04",
                        "--modality", "text", "--k", "4"});
  ASSERT_EQ(hit.code, 0) << hit.err;
  const auto rows = lines(hit.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(json::parse(rows[0])["rank"], 1);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GE(json::parse(rows[i - 1])["score"].get<double>(), json::parse(rows[i])["score"].get<double>());
  }
  const auto excl = run({"query", "--index", path("s.cmxi"), "--embeddings", path("s.cmxe"), "--id", "SYN04",
                         "--k", "30", "--exclude-self"});
  ASSERT_EQ(excl.code, 0);
  EXPECT_EQ(lines(excl.out).size(), 29u);
  EXPECT_EQ(excl.out.find("\"SYN04\""), std::string::npos);

  const auto missing = run({"query", "--index", path("s.cmxi"), "--embeddings", path("s.cmxe"), "--id", "missing"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("not found"), std::string::npos) << missing.err;
}

TEST_F(CliTest, SplitWritesThreePartitions) {
  ASSERT_EQ(run({"synth", "--n", "100", "--dim", "4", "--out", path("s.cmxe")}).code, 0);
  const auto r = run({"split", "--in", path("s.cmxe"), "--out-dir", path("parts"), "--test-per-class", "10",
                      "--val-frac", "0.25", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["test"], 20);
  EXPECT_EQ(j["val"], 20);
  EXPECT_EQ(j["train"], 60);
  EXPECT_EQ(xmodal::read_embeddings(path("parts/val.cmxe")).size(), 20u);
  EXPECT_EQ(run({"split", "--in", path("s.cmxe"), "--out-dir", path("p2"), "--test-per-class", "500"}).code, 2);
}

TEST_F(CliTest, SeededCommandsAreReproducible) {
  ASSERT_EQ(run({"synth", "--n", "60", "--dim", "6", "--seed", "5", "--modality-gap", "0.5", "--out",
                 path("a.cmxe")}).code, 0);
  ASSERT_EQ(run({"synth", "--n", "60", "--dim", "6", "--seed", "5", "--modality-gap", "0.5", "--out",
                 path("b.cmxe")}).code, 0);
  EXPECT_EQ(slurp(path("a.cmxe")), slurp(path("b.cmxe")));

  const std::vector<std::string> train{"train", "--train", path("a.cmxe"), "--val", path("a.cmxe"), "--epochs",
                                       "3", "--batch", "8", "--lr-backbone", "1e-3", "--seed", "9", "--out"};
  auto first = train, second = train;
  first.push_back(path("m1.cmxm"));
  second.push_back(path("m2.cmxm"));
  const auto r1 = run(first), r2 = run(second);
  ASSERT_EQ(r1.code, 0) << r1.err;
  EXPECT_EQ(r1.out, r2.out);
  EXPECT_EQ(lines(r1.out).size(), 3u);
  EXPECT_EQ(slurp(path("m1.cmxm")), slurp(path("m2.cmxm")));

  const std::vector<std::string> tune{"tune", "--train", path("a.cmxe"), "--val", path("a.cmxe"), "--batch", "8",
                                      "--trials", "3", "--epochs-per-trial", "1", "--tuner-seed", "4"};
  auto t1 = tune;
  t1.insert(t1.end(), {"--ledger", path("ledger.jsonl")});
  const auto a = run(t1), b = run(tune);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto out_lines = lines(a.out);
  ASSERT_EQ(out_lines.size(), 4u);
  EXPECT_TRUE(json::parse(out_lines.back()).contains("best"));
  EXPECT_EQ(lines(slurp(path("ledger.jsonl"))).size(), 3u);

  ASSERT_EQ(run({"index-build", "--embeddings", path("a.cmxe"), "--model", path("m1.cmxm"), "--out",
                 path("a.cmxi")}).code, 0);
  const auto p1 = run({"project2d", "--embeddings", path("a.cmxe"), "--model", path("m1.cmxm")});
  const auto p2 = run({"project2d", "--embeddings", path("a.cmxe"), "--model", path("m1.cmxm")});
  ASSERT_EQ(p1.code, 0) << p1.err;
  EXPECT_EQ(p1.out, p2.out);
  EXPECT_EQ(lines(p1.out).size(), 60u);
  EXPECT_TRUE(json::parse(lines(p1.out)[0]).contains("x"));
  ASSERT_EQ(run({"project2d", "--embeddings", path("a.cmxe"), "--space", "text", "--out", path("p.jsonl")}).code, 0);
  EXPECT_EQ(lines(slurp(path("p.jsonl"))).size(), 60u);
}

TEST_F(CliTest, ModelDimensionMismatchIsDataError) {
  ASSERT_EQ(run({"synth", "--n", "20", "--dim", "6", "--out", path("a.cmxe")}).code, 0);
  ASSERT_EQ(run({"synth", "--n", "20", "--dim", "4", "--out", path("b.cmxe")}).code, 0);
  ASSERT_EQ(run({"train", "--train", path("b.cmxe"), "--val", path("b.cmxe"), "--epochs", "0", "--out",
                 path("m.cmxm")}).code, 0);
  EXPECT_EQ(run({"index-build", "--embeddings", path("a.cmxe"), "--model", path("m.cmxm"), "--out",
                 path("x.cmxi")}).code, 2);
}

TEST_F(CliTest, IngestFixtureManifest) {
  const fs::path fx(XMODAL_FIXTURE_DIR);
  {
    std::ofstream m(path("manifest.jsonl"));
    for (const std::string name : {"normal", "opacity", "truncated", "both_sections"}) {
      m << json{{"study_id", name}, {"image_path", name + ".png"},
                {"report_path", (fx / "reports" / (name + ".xml")).string()}}.dump()
        << "\n";
    }
  }
  const auto r = run({"ingest", "--manifest", path("manifest.jsonl"), "--out", path("corpus.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["studies"], 3);
  EXPECT_EQ(j["failures"], 1);
  EXPECT_NE(r.err.find("warning: study truncated"), std::string::npos) << r.err;
  EXPECT_EQ(lines(slurp(path("corpus.jsonl"))).size(), 3u);

  std::ofstream(path("bad.jsonl")) << "{not json\n";
  EXPECT_EQ(run({"ingest", "--manifest", path("bad.jsonl"), "--out", path("c2.jsonl")}).code, 2);
}
