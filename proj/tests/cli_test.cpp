#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "evdet/annotation.hpp"
#include "evdet/cli.hpp"
#include "evdet/event_model.hpp"

using namespace evdet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("evdet_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SynthThenDetect) {
  const Result s = run({"synth", "--rpm", "10000", "--blades", "2", "--radius", "50", "--duration-ms", "20",
                        "--seed", "7", "-o", path("scene.csv")});
  ASSERT_EQ(s.code, 0) << s.err;
  ASSERT_TRUE(fs::exists(path("scene.json")));

  const Result d = run({"detect", "--input", path("scene.csv"), "--width", "640", "--height", "480", "--tau-s",
                        "50", "--tau-p", "3", "--k", "4", "--iou", "0.4", "--output", path("out.json")});
  ASSERT_EQ(d.code, 0) << d.err;
  const Annotation pred = load_annotations(path("out.json"));
  const Annotation truth = load_annotations(path("scene.json"));
  ASSERT_EQ(pred.boxes.size(), 1u);
  EXPECT_TRUE(pred.boxes[0].s_p.has_value());
  EXPECT_EQ(pred.file, "scene.csv");
  EXPECT_EQ(truth.boxes.size(), 1u);
}

TEST_F(CliTest, SynthIsDeterministic) {
  for (const char* name : {"a.csv", "b.csv"}) {
    ASSERT_EQ(run({"synth", "--seed", "7", "-o", path(name)}).code, 0);
  }
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  ASSERT_EQ(run({"synth", "--seed", "7", "--format", "bin", "-o", path("c.evd"), "--annotation", path("c_gt.json")})
                .code,
            0);
  EXPECT_EQ(slurp(path("c.evd")).substr(0, 4), "EVD1");
  EXPECT_TRUE(fs::exists(path("c_gt.json")));
}

TEST_F(CliTest, SynthValidation) {
  EXPECT_EQ(run({"synth", "--radius", "2", "-o", path("x.csv")}).code, cli::kExitInvalid);
  EXPECT_EQ(run({"synth", "--rpm", "20000", "-o", path("x.csv")}).code, cli::kExitInvalid);
  EXPECT_EQ(run({"synth", "--center", "10;10", "-o", path("x.csv")}).code, cli::kExitInvalid);
  EXPECT_EQ(run({"synth", "--center", "900,10", "-o", path("x.csv")}).code, cli::kExitInvalid);
  EXPECT_FALSE(fs::exists(path("x.csv")));
  EXPECT_EQ(run({"synth", "--rpm", "10000", "-o", path("ok.csv")}).code, 0);
  const Result neg = run({"synth", "--no-propeller", "-o", path("neg.csv")});
  EXPECT_EQ(neg.code, 0);
  EXPECT_TRUE(load_annotations(path("neg.json")).boxes.empty());
}

TEST_F(CliTest, DetectEmptyFile) {
  std::ofstream(path("empty.csv")).close();
  const Result r = run({"detect", "--input", path("empty.csv"), "--output", path("out.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(load_annotations(path("out.json")).boxes.empty());
}

TEST_F(CliTest, DetectValidatesFlagsFirst) {
  const Result r = run({"detect", "--input", path("nope.csv"), "--tau-s", "300", "--output", path("out.json")});
  EXPECT_EQ(r.code, cli::kExitInvalid);
  EXPECT_NE(r.err.find("0-255"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("out.json")));
  EXPECT_EQ(run({"detect", "--input", path("x.csv"), "--smooth-window", "4", "--output", path("o.json")}).code,
            cli::kExitInvalid);
  EXPECT_EQ(run({"detect", "--input", path("x.csv"), "--jobs", "0", "--output", path("o.json")}).code,
            cli::kExitInvalid);
}

TEST_F(CliTest, DetectErrorsMapToExitCodes) {
  EXPECT_EQ(run({"detect", "--input", path("missing.csv"), "--output", path("o.json")}).code, cli::kExitIo);
  std::ofstream(path("bad.csv")) << "1,2,three,1\n";
  const Result bad = run({"detect", "--input", path("bad.csv"), "--output", path("o.json")});
  EXPECT_EQ(bad.code, cli::kExitInvalid);
  EXPECT_NE(bad.err.find("line 1"), std::string::npos) << bad.err;
  std::ofstream(path("oob.csv")) << "1,700,2,1\n";
  EXPECT_EQ(run({"detect", "--input", path("oob.csv"), "--output", path("o.json")}).code, cli::kExitInvalid);
  EXPECT_EQ(run({"detect", "--output", path("o.json")}).code, cli::kExitInvalid);
  EXPECT_EQ(run({"detect", "--input", path("x.csv"), "--output", path("o.json"), "--bogus"}).code, cli::kExitInvalid);
  EXPECT_EQ(run({}).code, cli::kExitInvalid);
}

TEST_F(CliTest, DetectManyInputsInParallel) {
  for (int i = 0; i < 3; ++i) {
    ASSERT_EQ(run({"synth", "--seed", std::to_string(i), "-o", path("s" + std::to_string(i) + ".csv")}).code, 0);
  }
  const std::vector<std::string> inputs{path("s2.csv"), path("s0.csv"), path("s1.csv")};
  std::vector<std::string> serial{"detect", "-j", "1", "-o", path("serial")};
  std::vector<std::string> parallel{"detect", "-j", "3", "-o", path("parallel")};
  for (const auto& in : inputs) {
    serial.insert(serial.end(), {"-i", in});
    parallel.insert(parallel.end(), {"-i", in});
  }
  const Result a = run(serial);
  const Result b = run(parallel);
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_LT(a.out.find("s0.csv"), a.out.find("s1.csv"));
  for (int i = 0; i < 3; ++i) {
    const std::string name = "s" + std::to_string(i) + ".json";
    EXPECT_EQ(slurp(path("serial") + "/" + name), slurp(path("parallel") + "/" + name));
  }
}

TEST_F(CliTest, DetectDumps) {
  ASSERT_EQ(run({"synth", "--seed", "3", "-o", path("s.csv")}).code, 0);
  const Result r = run({"detect", "-i", path("s.csv"), "-o", path("d.json"), "--dump-saliency", path("sal.pgm"),
                        "--dump-features", path("feat.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string pgm = slurp(path("sal.pgm"));
  EXPECT_EQ(pgm.substr(0, 2), "P5");
  EXPECT_NE(pgm.find("640 480"), std::string::npos);
  const std::string feat = slurp(path("feat.csv"));
  EXPECT_EQ(feat.substr(0, feat.find('\n')), "candidate,x,y,w,h,s_s,s_p,slice,f_d,f_s,f_p");
  EXPECT_GT(std::count(feat.begin(), feat.end(), '\n'), 40);
}

TEST_F(CliTest, EvalPerfectAndOrphans) {
  fs::create_directories(path("gt"));
  fs::create_directories(path("pred"));
  for (int i = 0; i < 3; ++i) {
    const std::string stem = "s" + std::to_string(i);
    ASSERT_EQ(run({"synth", "--seed", std::to_string(i), "-o", path(stem + ".csv"), "--annotation",
                   path("gt/" + stem + ".json")})
                  .code,
              0);
    fs::copy_file(path("gt/" + stem + ".json"), path("pred/" + stem + ".json"));
  }
  const Result r = run({"eval", "--pred", path("pred"), "--gt", path("gt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("P=1.000 R=1.000"), std::string::npos) << r.out;

  const Result j = run({"eval", "--pred", path("pred"), "--gt", path("gt"), "--json", "--per-period"});
  ASSERT_EQ(j.code, 0);
  const auto parsed = nlohmann::json::parse(j.out);
  EXPECT_EQ(parsed["recall"], 1.0);
  EXPECT_EQ(parsed["iou_threshold"], 0.4);
  EXPECT_EQ(parsed["per_period"].size(), 3u);

  const Result sub = run({"eval", "--pred", path("pred"), "--gt", path("gt"), "--scale", "large", "--json"});
  ASSERT_EQ(sub.code, 0) << sub.err;
  EXPECT_EQ(run({"eval", "--pred", path("pred"), "--gt", path("gt"), "--aspect", "wide"}).code, cli::kExitInvalid);

  fs::remove(path("pred/s1.json"));
  const Result o = run({"eval", "--pred", path("pred"), "--gt", path("gt")});
  EXPECT_EQ(o.code, cli::kExitInvalid);
  EXPECT_NE(o.err.find("s1.json"), std::string::npos) << o.err;
}

TEST_F(CliTest, BenchJson) {
  const Result r = run({"bench", "--events", "20000", "--reps", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  ASSERT_TRUE(j.contains("median_ms"));
  EXPECT_EQ(j["events"], 20000);
  EXPECT_EQ(j["p95_ms"], j["median_ms"]);
  EXPECT_EQ(run({"bench", "--reps", "0"}).code, cli::kExitInvalid);
}

TEST(CliHelp, ListsDefaultsFromConfig) {
  const Result r = run({"detect", "--help"});
  ASSERT_EQ(r.code, 0);
  const DetectorConfig d;
  for (const std::string& want :
       {"--tau-s INT [" + std::to_string(d.tau_s) + "]", "--tau-p INT [" + std::to_string(d.tau_p) + "]",
        "--k INT [" + std::to_string(d.k_top) + "]", "--smooth-window INT [" + std::to_string(d.smooth_window) + "]",
        "--margin INT [" + std::to_string(d.region_margin) + "]", std::string("--d-merge FLOAT [50]"),
        std::string("--iou FLOAT [0.4]")}) {
    EXPECT_NE(r.out.find(want), std::string::npos) << want << "\n" << r.out;
  }
  EXPECT_EQ(run({"--help"}).code, 0);
  for (const char* sub : {"synth", "eval", "bench"}) EXPECT_EQ(run({sub, "--help"}).code, 0);
}
