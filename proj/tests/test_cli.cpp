/**
 * Copyright 2026 The cropseg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>

#include "cropseg/io.hpp"
#include "cropseg/nn/weight_store.hpp"
#include "json.hpp"

namespace stdfs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(CROPSEG_CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// One shared workspace: a tiny dataset and a one-epoch model.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = stdfs::temp_directory_path() / ("cropseg_cli_" + std::to_string(::getpid()));
    stdfs::remove_all(root_);
    stdfs::create_directories(root_);
    ASSERT_EQ(cli("synth --preset home --count 12 --size 64x48 --seed 5 --out " + q(root_ / "data")).code, 0);
    const auto r = cli("train --data " + q(root_ / "data") + " --out " + q(root_ / "model") +
                       " --size 64x48 --epochs 1 --batch 4 --quiet");
    ASSERT_EQ(r.code, 0);
  }
  static void TearDownTestSuite() { stdfs::remove_all(root_); }
  static std::string q(const stdfs::path& p) { return "'" + p.string() + "'"; }

  static stdfs::path root_;
};
stdfs::path CliTest::root_;

}  // namespace

TEST_F(CliTest, SynthWritesLayoutAndManifest) {
  EXPECT_TRUE(stdfs::exists(root_ / "data" / "manifest.json"));
  EXPECT_TRUE(stdfs::exists(root_ / "data" / "images" / "home_5.png"));
  EXPECT_TRUE(stdfs::exists(root_ / "data" / "labels" / "home_16.png"));
  const auto m = cropseg::io::read_manifest(root_ / "data");
  EXPECT_EQ(m.stems.size(), 12u);
  EXPECT_EQ(m.split.train.size() + m.split.val.size() + m.split.test.size(), 12u);
}

TEST_F(CliTest, TrainWritesModelHistoryAndRepro) {
  const auto ws = cropseg::nn::WeightStore::load(root_ / "model" / "model.cswt");
  EXPECT_TRUE(ws.contains("head.weight"));
  EXPECT_TRUE(stdfs::exists(root_ / "model" / "history.csv"));
  const auto bytes = cropseg::fs::read_file(root_ / "model" / "repro.json");
  const auto repro = json::parse(bytes.begin(), bytes.end());
  EXPECT_EQ(repro.at("command"), "train");
  EXPECT_EQ(repro.at("config").at("batch"), 4);
}

TEST_F(CliTest, InferThenEvalRoundTrip) {
  const auto img = root_ / "data" / "images" / "home_5.png";
  const auto r = cli("infer --model " + q(root_ / "model" / "model.cswt") + " --out " + q(root_ / "pred") + " " + q(img));
  ASSERT_EQ(r.code, 0);
  const auto mask = cropseg::io::read_label_png(root_ / "pred" / "home_5_mask.png");
  EXPECT_EQ(mask.width(), 64);
  EXPECT_TRUE(stdfs::exists(root_ / "pred" / "home_5_overlay.png"));
  const auto tb = cropseg::fs::read_file(root_ / "pred" / "timing.json");
  EXPECT_TRUE(json::parse(tb.begin(), tb.end()).dump().find("network_ms") != std::string::npos);

  // ground truth equal to itself: perfect scores
  const auto self = cli("eval --pred " + q(root_ / "data") + " --gt " + q(root_ / "data"));
  ASSERT_EQ(self.code, 0);
  const auto rep = json::parse(self.out);
  EXPECT_EQ(rep.at("pixel").at("miou"), 1.0);
  EXPECT_EQ(rep.at("images"), 12);
}

TEST_F(CliTest, EvalMissingPredictionFails) {
  stdfs::create_directories(root_ / "empty");
  EXPECT_EQ(cli("eval --pred " + q(root_ / "empty") + " --gt " + q(root_ / "data")).code, 2);
}

TEST_F(CliTest, BaselinesWriteMasks) {
  const auto img = root_ / "data" / "images" / "home_6.png";
  for (const std::string method : {"otsu", "adaptive"}) {
    const auto out = root_ / ("mask_" + method + ".png");
    const auto r = cli("baseline --method " + method + " " + q(img) + " --out " + q(out));
    ASSERT_EQ(r.code, 0) << method;
    const double frac = json::parse(r.out).at("vegetation_fraction");
    EXPECT_GT(frac, 0.0);
    EXPECT_LT(frac, 1.0);
    EXPECT_TRUE(stdfs::exists(out));
  }
  EXPECT_EQ(cli("baseline --method adaptive --window 50 " + q(img) + " --out " + q(root_ / "x.png")).code, 1);
}

TEST_F(CliTest, PreprocessDumpsFourteenChannels) {
  const auto r = cli("preprocess " + q(root_ / "data" / "images" / "home_7.png") + " --size 64x48 --out " +
                     q(root_ / "pre"));
  ASSERT_EQ(r.code, 0);
  int bins = 0;
  for (const auto& e : stdfs::directory_iterator(root_ / "pre")) bins += e.path().extension() == ".bin";
  EXPECT_EQ(bins, 14);
}

TEST_F(CliTest, RetrainHeadOnAwayData) {
  ASSERT_EQ(cli("synth --preset away --count 6 --size 64x48 --seed 9 --out " + q(root_ / "away")).code, 0);
  const auto r = cli("retrain-head --model " + q(root_ / "model" / "model.cswt") + " --data " + q(root_ / "away") +
                     " --out " + q(root_ / "adapted") + " --count 5 --max-epochs 3 --quiet");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(stdfs::exists(root_ / "adapted" / "model.cswt"));
  EXPECT_EQ(cli("retrain-head --model " + q(root_ / "model" / "model.cswt") + " --data " + q(root_ / "away") +
                " --out " + q(root_ / "adapted2") + " --count 1 --quiet")
                .code,
            1);
}

TEST_F(CliTest, AnalyzeReportsTotals) {
  const auto r = cli("analyze --size 512x384");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("29107"), std::string::npos);
  EXPECT_NE(r.out.find("2514223104"), std::string::npos);
  const auto csv = cli("analyze --size 128x96 --csv --channels rgb");
  EXPECT_EQ(csv.code, 0);
  EXPECT_EQ(csv.out.rfind("name,kind", 0), 0u);
}

TEST_F(CliTest, BenchReportsStagesAndEnforcesMinimums) {
  const auto r = cli("bench --size 64x48 --iterations 10 --warmup 3");
  ASSERT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_GT(j.at("fps").get<double>(), 0.0);
  EXPECT_TRUE(j.contains("preprocess"));
  EXPECT_TRUE(j.at("network").contains("p95_ms"));
  EXPECT_EQ(cli("bench --iterations 5").code, 1);
  EXPECT_EQ(cli("bench --warmup 1").code, 1);
}

TEST_F(CliTest, UsageErrorsExitWithOne) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("synth --preset mars --out /tmp/x").code, 1);
  EXPECT_EQ(cli("analyze --size 100x100").code, 1);  // not divisible by 16
  EXPECT_EQ(cli("--version").code, 0);
}

TEST_F(CliTest, CorruptModelIsALoadError) {
  cropseg::fs::write_atomic(root_ / "bad.cswt", std::string_view("CSWT\x09\0\0\0", 8));
  EXPECT_EQ(cli("infer --model " + q(root_ / "bad.cswt") + " --out " + q(root_ / "o") + " " +
                q(root_ / "data" / "images" / "home_5.png"))
                .code,
            2);
}
