#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ambitwin/datasets.hpp"
#include "ambitwin/straw.hpp"
#include "ambitwin/twin.hpp"

namespace fs = std::filesystem;
using namespace ambitwin;

namespace {

struct Result {
  int code = -1;
  std::string output;  ///< stdout and stderr interleaved
};

Result run(const std::string &args) {
  const std::string cmd = std::string(AMBITWIN_TOOL_PATH) + " " + args + " 2>&1";
  Result r;
  FILE *pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) {
    return r;
  }
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) {
    r.output.append(buf.data(), n);
  }
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

std::size_t count_lines(const std::string &text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

std::size_t count_of(const std::string &text, const std::string &needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) {
    ++n;
  }
  return n;
}

const std::string kGerman = std::string(AMBITWIN_TEST_DATA_DIR) + "/german.data";

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("ambitwin_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string config(const std::string &name, const nlohmann::json &doc) {
    const fs::path p = dir_ / name;
    write(p, doc.dump(2));
    return p.string();
  }

  std::string path(const std::string &name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

const nlohmann::json kStrawsSmall = {
    {"kind", "straws"},
    {"seed", 17},
    {"straws", {{"n_events", 400}}},
    {"train", {{"phase1_iters", 3000}, {"phase2_iters", 3000}}},
};

const nlohmann::json kCreditSmall = {
    {"kind", "credit"},
    {"seed", 5},
    {"credit", {{"format", "symbolic"}}},
    {"train", {{"phase1_iters", 3000}, {"phase2_iters", 3000}}},
};

} // namespace

TEST_F(CliTest, GenStrawsDefaultSize) {
  nlohmann::json doc = {{"kind", "straws"}, {"seed", 1}, {"straws", {{"n_events", 25000}, {"min_straws", 4}}}};
  const auto r = run("gen --config " + config("c.json", doc) + " --out " + path("out"));
  ASSERT_EQ(r.code, 0) << r.output;
  std::ifstream in(path("out/dataset.csv"));
  const auto events = straw::read_events_csv(in);
  ASSERT_EQ(events.size(), 25000u);
  for (const auto &ev : events) {
    ASSERT_GE(ev.n_hits, 4u);
  }
}

TEST_F(CliTest, GenIsByteIdenticalAndManifestRegenerates) {
  const auto cfg = config("c.json", kStrawsSmall);
  ASSERT_EQ(run("gen --config " + cfg + " --out " + path("a")).code, 0);
  ASSERT_EQ(run("gen --config " + cfg + " --out " + path("b")).code, 0);
  EXPECT_EQ(slurp(path("a/dataset.csv")), slurp(path("b/dataset.csv")));

  const auto manifest = nlohmann::json::parse(slurp(path("a/manifest.json")));
  EXPECT_EQ(manifest.at("kind"), "straws");
  EXPECT_EQ(manifest.at("seed"), 17);
  EXPECT_EQ(manifest.at("rows"), 400);
  EXPECT_EQ(manifest.at("straws").at("min_straws"), 4);

  // A config rebuilt from the manifest alone reproduces the file.
  nlohmann::json rebuilt = {{"kind", manifest.at("kind")}, {"seed", manifest.at("seed")},
                            {"straws", manifest.at("straws")}};
  ASSERT_EQ(run("gen --config " + config("r.json", rebuilt) + " --out " + path("c")).code, 0);
  EXPECT_EQ(slurp(path("a/dataset.csv")), slurp(path("c/dataset.csv")));

  ASSERT_EQ(run("gen --config " + cfg + " --seed 18 --out " + path("d")).code, 0);
  EXPECT_NE(slurp(path("a/dataset.csv")), slurp(path("d/dataset.csv")));
}

TEST_F(CliTest, GenSyntheticWithoutSpreadIsAFunction) {
  nlohmann::json doc = {{"kind", "synthetic"},
                        {"seed", 2},
                        {"synthetic",
                         {{"mean", {{"type", "linear"}, {"slope", 0.5}, {"intercept", 0.25}}},
                          {"spread", {{"type", "constant"}, {"c", 0.0}}},
                          {"n_samples", 1000}}}};
  ASSERT_EQ(run("gen --config " + config("c.json", doc) + " --out " + path("out")).code, 0);
  std::ifstream in(path("out/dataset.csv"));
  const auto samples = data::read_samples_csv(in);
  ASSERT_EQ(samples.size(), 1000u);
  for (const auto &s : samples) {
    EXPECT_NEAR(s.target, 0.5 * s.input[0] + 0.25, 1e-15);
  }
  const auto manifest = nlohmann::json::parse(slurp(path("out/manifest.json")));
  EXPECT_EQ(manifest.at("synthetic").at("spread").at("type"), "constant");
}

TEST_F(CliTest, StrawsTrainEvalPredict) {
  const auto cfg = config("c.json", kStrawsSmall);
  ASSERT_EQ(run("gen --config " + cfg + " --out " + path("data")).code, 0);
  const auto tr = run("train --config " + cfg + " --data " + path("data/dataset.csv") + " --out " + path("run"));
  ASSERT_EQ(tr.code, 0) << tr.output;

  const std::string model = slurp(path("run/model.twin"));
  EXPECT_EQ(count_of(model, "mlp 14 25 1\n"), 2u);

  // Log: header, three phase-1 rows then three phase-2 rows.
  std::istringstream log(slurp(path("run/train_log.csv")));
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line, "phase,iteration,eta,mean_error");
  std::string phases;
  while (std::getline(log, line)) {
    phases += line.substr(0, 1);
  }
  EXPECT_EQ(phases, "111222");

  const auto ev = run("eval --config " + cfg + " --model " + path("run/model.twin") + " --data " +
                      path("data/dataset.csv") + " --out " + path("rep1"));
  ASSERT_EQ(ev.code, 0) << ev.output;
  ASSERT_EQ(run("eval --config " + cfg + " --model " + path("run/model.twin") + " --data " +
                path("data/dataset.csv") + " --out " + path("rep2"))
                .code,
            0);
  for (const char *f : {"errors.csv", "deltas.csv", "effective.csv", "hist_errors.csv", "hist_effective.csv",
                        "summary.txt"}) {
    EXPECT_EQ(slurp(path("rep1/") + f), slurp(path("rep2/") + f)) << f;
  }
  EXPECT_EQ(count_lines(slurp(path("rep1/errors.csv"))), 401u);
  EXPECT_EQ(count_lines(slurp(path("rep1/hist_errors.csv"))), 92u);
  const std::string summary = slurp(path("rep1/summary.txt"));
  for (const char *key : {"coverage = ", "raw_error_excess_kurtosis = ", "spearman_abs_error_delta = "}) {
    EXPECT_NE(summary.find(key), std::string::npos) << key;
  }

  const std::string zeros = "0,0,0,0,0,0,0,0,0,0,0,0,0,0";
  const auto p1 = run("predict --model " + path("run/model.twin") + " --input " + zeros);
  const auto p2 = run("predict --model " + path("run/model.twin") + " --input " + zeros);
  ASSERT_EQ(p1.code, 0) << p1.output;
  EXPECT_EQ(p1.output, p2.output);
  double value = NAN;
  double delta = NAN;
  std::istringstream(p1.output) >> value >> delta;
  EXPECT_TRUE(std::isfinite(value));
  EXPECT_TRUE(std::isfinite(delta));
  EXPECT_GE(delta, 0.0);
  // Six decimals, single space.
  EXPECT_EQ(p1.output.find('.') + 7, p1.output.find(' '));

  const auto twin = load_twin(path("run/model.twin"));
  const auto band = predict_band(twin, std::vector<double>(14, 0.0));
  EXPECT_NEAR(value, band.value, 5e-7);

  const auto piped = run("predict --model " + path("run/model.twin") + " < /dev/null");
  EXPECT_EQ(piped.code, 2);

  const auto narrow = run("predict --model " + path("run/model.twin") + " --input 0,0,0,0,0,0,0,0,0,0,0,0,0");
  EXPECT_EQ(narrow.code, 2);
  EXPECT_NE(narrow.output.find("13"), std::string::npos) << narrow.output;
}

TEST_F(CliTest, CreditTrainUses24Inputs) {
  const auto cfg = config("c.json", kCreditSmall);
  const auto tr = run("train --config " + cfg + " --data " + kGerman + " --out " + path("run"));
  ASSERT_EQ(tr.code, 0) << tr.output;
  // The default credit schedules trip the slower-second-net advisory.
  EXPECT_NE(tr.output.find("warning:"), std::string::npos);
  EXPECT_EQ(count_of(slurp(path("run/model.twin")), "mlp 24 14 1\n"), 2u);

  const auto ev = run("eval --config " + cfg + " --model " + path("run/model.twin") + " --data " + kGerman +
                      " --out " + path("rep"));
  ASSERT_EQ(ev.code, 0) << ev.output;
  const std::string summary = slurp(path("rep/summary.txt"));
  EXPECT_NE(summary.find("cases = 200\n"), std::string::npos) << summary;
  EXPECT_NE(summary.find("train_classification_accuracy = "), std::string::npos);
  EXPECT_NE(summary.find("median_delta_misclassified = "), std::string::npos);
}

TEST_F(CliTest, ConvertCreditWritesNumericFile) {
  const auto r = run("convert-credit --data " + kGerman + " --out " + path("conv"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto recs = data::load_credit(path("conv/german.data-numeric"));
  EXPECT_EQ(recs.size(), 1000u);

  nlohmann::json doc = kCreditSmall;
  doc["credit"]["format"] = "numeric";
  doc["train"]["phase1_iters"] = 1000;
  doc["train"]["phase2_iters"] = 1000;
  nlohmann::json sym = kCreditSmall;
  sym["train"] = doc["train"];
  ASSERT_EQ(run("train --config " + config("n.json", doc) + " --data " + path("conv/german.data-numeric") +
                " --out " + path("n"))
                .code,
            0);
  ASSERT_EQ(run("train --config " + config("s.json", sym) + " --data " + kGerman + " --out " + path("s")).code, 0);
  EXPECT_EQ(slurp(path("n/model.twin")), slurp(path("s/model.twin")));
}

TEST_F(CliTest, ValidationFailuresExitTwoAndWriteNothing) {
  nlohmann::json unknown = kStrawsSmall;
  unknown["straws"]["n_straws"] = 3;
  auto r = run("gen --config " + config("u.json", unknown) + " --out " + path("u"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("n_straws"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(path("u")));

  nlohmann::json impossible = kStrawsSmall;
  impossible["straws"]["min_straws"] = 15;
  EXPECT_EQ(run("gen --config " + config("i.json", impossible) + " --out " + path("i")).code, 2);
  EXPECT_FALSE(fs::exists(path("i")));

  write(path("bad.json"), "{ not json");
  EXPECT_EQ(run("gen --config " + path("bad.json") + " --out " + path("b")).code, 2);
  EXPECT_EQ(run("gen --out " + path("b")).code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("gen --config " + config("k.json", {{"kind", "straws"}, {"colour", 1}}) + " --out " + path("k")).code,
            2);
  EXPECT_EQ(run("gen --config " + config("cr.json", kCreditSmall) + " --out " + path("cr")).code, 2);
  EXPECT_FALSE(fs::exists(path("b")));
}

TEST_F(CliTest, RuntimeFailuresExitOne) {
  const auto cfg = config("c.json", kStrawsSmall);
  EXPECT_EQ(run("train --config " + cfg + " --data " + path("missing.csv") + " --out " + path("o")).code, 1);
  EXPECT_EQ(run("predict --model " + path("missing.twin") + " --input 0").code, 1);
  write(path("broken.csv"), "s0,s1,angle_deg,n_hits\n0.5\n");
  EXPECT_EQ(run("train --config " + cfg + " --data " + path("broken.csv") + " --out " + path("o")).code, 1);
  EXPECT_FALSE(fs::exists(path("o")));
}

TEST_F(CliTest, DatasetWidthMismatchIsRejected) {
  nlohmann::json wide = kStrawsSmall;
  wide["straws"]["n_layers"] = 3;
  ASSERT_EQ(run("gen --config " + config("w.json", wide) + " --out " + path("w")).code, 0);
  const auto r =
      run("train --config " + config("c.json", kStrawsSmall) + " --data " + path("w/dataset.csv") + " --out " +
          path("o"));
  EXPECT_EQ(r.code, 2);
  EXPECT_FALSE(fs::exists(path("o")));
}
