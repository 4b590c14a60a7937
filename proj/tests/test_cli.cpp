#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "procap/corpus/fixtures.hpp"
#include "procap/inference/trace.hpp"
#include "procap/io/bundle.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace procap;

namespace {

const std::string kCli = PROCAP_CLI;

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" + kCli + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// A toy corpus plus a small config; shared by every test in this file.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "procap_cli_test";
    fs::remove_all(root_);
    corpus::write_toy_fixture(root_ / "toy");
    json cfg = {{"vocab", {{"max_words", 1000}}},
                {"model",
                 {{"embed_dim", 8}, {"encoder_hidden", 6}, {"recipe_hidden", 12}, {"decoder_hidden", 10}}},
                {"train",
                 {{"text", {{"epochs", 2}, {"batch_size", 4}, {"lr", 0.005}}},
                  {"video", {{"epochs", 1}, {"batch_size", 4}, {"lr", 0.005}}}}},
                {"anticipate", {{"window", 40}}}};
    std::ofstream(root_ / "config.json") << cfg.dump(2);
    ASSERT_EQ(run("build-vocab " + corpus() + " " + config() + " --out " + p("vocab")), 0);
    ASSERT_EQ(run("train --stage text --seed 3 --quiet " + corpus() + " " + config() + " --vocab " + p("vocab") +
                  " --out " + p("text")),
              0);
  }

  static std::string p(const std::string& rel) { return "\"" + (root_ / rel).string() + "\""; }
  static std::string corpus() { return "--corpus " + p("toy/recipes.jsonl"); }
  static std::string config() { return "--config " + p("config.json"); }

  static std::vector<infer::PredictionTrace> traces(const std::string& rel) {
    std::vector<infer::PredictionTrace> out;
    std::ifstream is(root_ / rel);
    std::string line;
    while (std::getline(is, line)) out.push_back(json::parse(line).get<infer::PredictionTrace>());
    return out;
  }

  static inline fs::path root_;
};

}  // namespace

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run("no-such-command"), 1);
  EXPECT_EQ(run("train --stage video " + corpus() + " --out " + p("x")), 1) << "missing --pretrained";
  EXPECT_EQ(run("train --stage video " + corpus() + " --pretrained " + p("nope.ckpt") + " --out " + p("x")), 2);
  EXPECT_EQ(run("anticipate --checkpoint " + p("text/model.ckpt") + " " + corpus() + " --strategy window:x --out " +
                p("x")),
            1);
  std::ofstream(root_ / "broken.jsonl") << "{\"id\": \"a\", \"steps\": [\n";
  EXPECT_EQ(run("build-vocab --corpus " + p("broken.jsonl") + " --out " + p("x")), 2);
  EXPECT_EQ(run("train --stage text --quiet --lr 1e38 --epochs 3 " + corpus() + " " + config() + " --vocab " +
                p("vocab") + " --out " + p("diverge")),
            3);
}

TEST_F(CliTest, BuildVocabIsDeterministicAndWritesManifest) {
  ASSERT_EQ(run("build-vocab " + corpus() + " " + config() + " --out " + p("vocab2")), 0);
  EXPECT_EQ(slurp(root_ / "vocab/vocab.txt"), slurp(root_ / "vocab2/vocab.txt"));
  EXPECT_EQ(slurp(root_ / "vocab/ingredients.txt"), slurp(root_ / "vocab2/ingredients.txt"));
  const auto a = json::parse(slurp(root_ / "vocab/run_manifest.json"));
  const auto b = json::parse(slurp(root_ / "vocab2/run_manifest.json"));
  EXPECT_EQ(a.at("command"), "build-vocab");
  EXPECT_EQ(a.at("inputs"), b.at("inputs"));
  std::set<std::string> da, db;
  for (const auto& [k, v] : a.at("outputs").items()) da.insert(v.get<std::string>());
  for (const auto& [k, v] : b.at("outputs").items()) db.insert(v.get<std::string>());
  EXPECT_EQ(da, db);
  EXPECT_EQ(da.size(), 2u);
  EXPECT_TRUE(a.contains("git_describe"));
}

TEST_F(CliTest, ZeroEpochsWritesTheInitialization) {
  ASSERT_EQ(run("train --stage text --epochs 0 --seed 5 --quiet " + corpus() + " " + config() + " --vocab " +
                p("vocab") + " --out " + p("zero")),
            0);
  const auto b = io::load_bundle(root_ / "zero/model.ckpt");
  model::Model<float> init(b.model.config());
  init.initialize(5);
  for (std::size_t i = 0; i < init.params().size(); ++i) {
    EXPECT_EQ(init.params()[i].value, b.model.params()[i].value) << init.params()[i].name;
  }
  EXPECT_EQ(b.model.config().embed_dim, 8u);
  EXPECT_EQ(b.model.config().feature_dim, 16u);
}

TEST_F(CliTest, SeedFallsBackToEnvironment) {
  ASSERT_EQ(run("train --stage text --epochs 0 --quiet " + corpus() + " " + config() + " --vocab " + p("vocab") +
                    " --out " + p("envseed"),
                "PROCAP_SEED=5"),
            0);
  ASSERT_EQ(run("train --stage text --epochs 0 --seed 5 --quiet " + corpus() + " " + config() + " --vocab " +
                p("vocab") + " --out " + p("flagseed")),
            0);
  EXPECT_EQ(slurp(root_ / "envseed/model.ckpt"), slurp(root_ / "flagseed/model.ckpt"));
  EXPECT_EQ(json::parse(slurp(root_ / "envseed/run_manifest.json")).at("seed"), 5);
}

TEST_F(CliTest, VideoStageAndEveryStrategy) {
  ASSERT_EQ(run("train --stage video --seed 3 --quiet " + corpus() + " " + config() + " --pretrained " +
                p("text/model.ckpt") + " --out " + p("video")),
            0);
  const auto log = slurp(root_ / "video/train_log.jsonl");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 1);
  for (const std::string& s :
       std::vector<std::string>{"gt", "window:40", "proposals:" + (root_ / "toy/proposals").string()}) {
    EXPECT_EQ(run("anticipate --quiet --modality video --strategy \"" + s + "\" --checkpoint " +
                  p("video/model.ckpt") + " " + corpus() + " --out " + p("ant_video")),
              0)
        << s;
    const auto t = traces("ant_video/traces.jsonl");
    ASSERT_EQ(t.size(), 2u);
    EXPECT_EQ(t[0].strategy, s);
  }
  EXPECT_TRUE(fs::exists(root_ / "ant_video/segmentation.json"));
}

TEST_F(CliTest, HorizonsAndBeamDominance) {
  ASSERT_EQ(run("anticipate --quiet --split all --horizons 4 --checkpoint " + p("text/model.ckpt") + " " +
                corpus() + " --out " + p("greedy")),
            0);
  ASSERT_EQ(run("anticipate --quiet --split all --decode beam5 --threads 3 --checkpoint " + p("text/model.ckpt") +
                " " + corpus() + " --out " + p("beam")),
            0);
  const auto g = traces("greedy/traces.jsonl");
  const auto b = traces("beam/traces.jsonl");
  ASSERT_EQ(g.size(), 20u);
  ASSERT_EQ(b.size(), g.size());
  std::set<std::size_t> horizons;
  for (std::size_t i = 0; i < g.size(); ++i) {
    ASSERT_EQ(g[i].rows.size(), b[i].rows.size());
    for (std::size_t r = 0; r < g[i].rows.size(); ++r) {
      const auto& gp = g[i].rows[r].predictions;
      const auto& bp = b[i].rows[r].predictions;
      ASSERT_EQ(gp.size(), bp.size());
      for (std::size_t k = 0; k < gp.size(); ++k) {
        EXPECT_DOUBLE_EQ(bp[k].rhat_norm, gp[k].rhat_norm);
        EXPECT_GE(bp[k].logprob, gp[k].logprob - 1e-9);
        horizons.insert(gp[k].horizon);
      }
    }
  }
  EXPECT_EQ(horizons, (std::set<std::size_t>{1, 2, 3, 4}));
}

TEST_F(CliTest, EvaluateIdentityCsvShapeAndFutureMode) {
  // Identity traces: every prediction is its ground-truth step.
  const auto recipes = corpus::load_corpus(root_ / "toy/recipes.jsonl");
  std::ofstream os(root_ / "identity.jsonl");
  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& r : recipes) {
    infer::PredictionTrace t;
    t.recipe_id = r.id;
    t.modality = "text";
    t.strategy = "gt";
    t.decode = "greedy";
    t.num_steps = r.steps.size();
    t.context_items = r.steps.size();
    for (std::size_t j = 0; j < r.steps.size(); ++j) {
      infer::PrefixRow row;
      row.observed = j;
      for (std::size_t h = 1; h <= 4 && j + h <= r.steps.size(); ++h) {
        infer::Prediction p;
        p.horizon = h;
        p.target_step = j + h;
        p.words = corpus::tokenize(r.steps[j + h - 1]);
        row.predictions.push_back(p);
        cells.insert({j, h});
      }
      t.rows.push_back(row);
    }
    os << json(t).dump() << '\n';
  }
  os.close();
  ASSERT_EQ(run("evaluate --traces " + p("identity.jsonl") + " " + corpus() + " --ingredient-vocab " +
                p("vocab/ingredients.txt") + " --out " + p("ev_identity")),
            0);
  const auto rep = json::parse(slurp(root_ / "ev_identity/report.json"));
  for (const auto& c : rep.at("cells")) {
    EXPECT_EQ(c.at("bleu1"), 100.0);
    EXPECT_EQ(c.at("bleu4"), 100.0);
    EXPECT_EQ(c.at("meteor"), 100.0);
    if (!c.at("ingredient_recall").is_null()) EXPECT_EQ(c.at("ingredient_recall"), 1.0);
    if (!c.at("verb_recall").is_null()) EXPECT_EQ(c.at("verb_recall"), 1.0);
  }
  const auto csv = slurp(root_ / "ev_identity/report.csv");
  EXPECT_EQ(std::size_t(std::count(csv.begin(), csv.end(), '\n')), cells.size() + 1);

  // Future mode never scores below exact mode.
  ASSERT_EQ(run("anticipate --quiet --split all --checkpoint " + p("text/model.ckpt") + " " + corpus() + " --out " +
                p("pred")),
            0);
  for (const std::string mode : {"exact", "future"}) {
    ASSERT_EQ(run("evaluate --mode " + mode + " --traces " + p("pred/traces.jsonl") + " " + corpus() +
                  " --ingredient-vocab " + p("vocab/ingredients.txt") + " --out " + p("ev_" + mode)),
              0);
  }
  const auto exact = json::parse(slurp(root_ / "ev_exact/report.json")).at("cells");
  const auto future = json::parse(slurp(root_ / "ev_future/report.json")).at("cells");
  ASSERT_EQ(exact.size(), future.size());
  for (std::size_t i = 0; i < exact.size(); ++i) {
    for (const char* k : {"bleu1", "bleu4", "meteor"}) {
      EXPECT_GE(future[i].at(k).get<double>(), exact[i].at(k).get<double>() - 1e-12) << k;
    }
  }
}

TEST_F(CliTest, SweepWindowHasOneColumnPerWidth) {
  ASSERT_EQ(run("sweep-window --quiet --checkpoint " + p("text/model.ckpt") + " " + corpus() + " --out " +
                p("sweep")),
            0);
  std::ifstream is(root_ / "sweep/sweep.csv");
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header, "horizon,w30,w50,w70,w90,w110,w130,w150,w170,w190,w210,w230");
  std::size_t rows = 0;
  for (std::string line; std::getline(is, line);) ++rows;
  EXPECT_EQ(rows, 5u);
  EXPECT_EQ(run("sweep-window --widths 0,10 --checkpoint " + p("text/model.ckpt") + " " + corpus() + " --out " +
                p("sweep_bad")),
            1);
}
