#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "procap/corpus/features.hpp"
#include "procap/corpus/recipe.hpp"
#include "procap/corpus/tokenizer.hpp"
#include "procap/corpus/vocabulary.hpp"

using namespace procap;
using namespace procap::corpus;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("procap_corpus_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
}

Recipe make_recipe(std::string id, std::vector<std::string> steps, Split split = Split::kTrain,
                   std::vector<std::string> ingredients = {}) {
  Recipe r;
  r.id = std::move(id);
  r.steps = std::move(steps);
  r.split = split;
  r.ingredients = std::move(ingredients);
  return r;
}

}  // namespace

TEST(Tokenizer, SplitsPunctuationAndLowercases) {
  EXPECT_EQ(tokenize("Preheat oven to 400 degrees F."),
            (std::vector<std::string>{"preheat", "oven", "to", "400", "degrees", "f", "."}));
  EXPECT_TRUE(tokenize("").empty());
  EXPECT_TRUE(tokenize("  \t\n ").empty());
  EXPECT_EQ(tokenize("Whisk the eggs till light and fluffy").size(), 7u);
  EXPECT_EQ(tokenize("salt,pepper;  OIL"),
            (std::vector<std::string>{"salt", ",", "pepper", ";", "oil"}));
}

TEST(Tokenizer, IsIdempotentThroughJoin) {
  const std::vector<std::string> samples = {
      "Preheat oven to 400 degrees F.", "Add 1/2 cup (packed) brown sugar!!",
      "Stir -- then   serve.", "Crème brûlée, chilled", "a.b.c", ""};
  for (const auto& s : samples) {
    const auto once = tokenize(s);
    EXPECT_EQ(tokenize(join(once)), once) << s;
  }
  std::mt19937 rng(3);
  const std::string alphabet = "abcXYZ019 .,;!?()-/'\"\t";
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    const std::size_t n = rng() % 30;
    for (std::size_t i = 0; i < n; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    EXPECT_EQ(tokenize(join(tokenize(s))), tokenize(s)) << s;
  }
}

TEST(Vocabulary, AllTokensFitWhenBelowLimit) {
  std::vector<Recipe> rs = {make_recipe("r", {"a b c d e", "f g h i j"})};
  const auto v = build_vocabulary(rs, 20);
  EXPECT_EQ(v.size(), 14u);
  EXPECT_EQ(v.id("<pad>"), kUnk);  // reserved names are not ordinary words
  EXPECT_EQ(v.word(kPad), "<pad>");
  EXPECT_EQ(v.word(kEos), "<eos>");
}

TEST(Vocabulary, KeepsMostFrequentWithLexicographicTies) {
  // Token tK appears K+1 times, so t99..t50 are the 50 most frequent.
  std::vector<std::string> steps;
  for (int k = 0; k < 100; ++k) {
    std::string s;
    for (int rep = 0; rep <= k; ++rep) s += "t" + std::to_string(k) + " ";
    steps.push_back(s);
  }
  const auto v = build_vocabulary({make_recipe("r", steps)}, 54);
  ASSERT_EQ(v.size(), 54u);
  EXPECT_EQ(v.word(4), "t99");
  for (int k = 50; k < 100; ++k) EXPECT_TRUE(v.contains("t" + std::to_string(k))) << k;
  EXPECT_FALSE(v.contains("t49"));

  const auto ties = build_vocabulary({make_recipe("r", {"zeta alpha mu alpha"})}, 6);
  EXPECT_EQ(ties.words(), (std::vector<std::string>{"alpha", "mu"}));
}

TEST(Vocabulary, OnlyTrainingStepsCount) {
  std::vector<Recipe> rs = {make_recipe("a", {"train words"}),
                            make_recipe("b", {"held out"}, Split::kTest)};
  const auto v = build_vocabulary(rs, 100);
  EXPECT_TRUE(v.contains("train"));
  EXPECT_FALSE(v.contains("held"));
  EXPECT_THROW(build_vocabulary({make_recipe("b", {"x"}, Split::kVal)}, 100), DataError);
}

TEST(Vocabulary, RejectsTinyMaxSize) {
  EXPECT_THROW(build_vocabulary({make_recipe("r", {"a"})}, 4), DataError);
  EXPECT_NO_THROW(build_vocabulary({make_recipe("r", {"a"})}, 5));
}

TEST(Vocabulary, IdsAndWordsAreMutualInverses) {
  std::vector<Recipe> rs = {make_recipe("r", {"chop the onion finely", "add the onion to the pan."})};
  const auto v = build_vocabulary(rs, 100);
  for (std::size_t i = kNumReserved; i < v.size(); ++i) {
    EXPECT_EQ(v.id(v.word(static_cast<TokenId>(i))), static_cast<TokenId>(i));
  }
  EXPECT_EQ(v.id("never-seen"), kUnk);
}

TEST(Vocabulary, SerializedFormRoundTripsAndIsDeterministic) {
  std::vector<Recipe> rs = {make_recipe("r", {"mix flour and sugar", "bake until golden"}),
                            make_recipe("s", {"mix eggs and milk"})};
  const auto a = build_vocabulary(rs, 1000);
  const auto b = build_vocabulary(rs, 1000);
  EXPECT_EQ(a.serialize(), b.serialize());

  std::istringstream is(a.serialize());
  EXPECT_EQ(Vocabulary::parse(is), a);

  const auto dir = temp_dir("vocab");
  save_text(dir / "v.txt", a);
  EXPECT_EQ(load_text<Vocabulary>(dir / "v.txt"), a);
  fs::remove_all(dir);
}

TEST(Ingredients, MultiHotEncoding) {
  const IngredientVocabulary iv({"a", "b", "c"});
  auto r = make_recipe("r", {"x"}, Split::kTrain, {"a", "b"});
  EXPECT_EQ(encode_ingredients(r, iv), (std::vector<float>{1, 1, 0}));

  IngredientCoverage cov;
  auto none = make_recipe("n", {"x"}, Split::kTrain, {"q", "z"});
  EXPECT_EQ(encode_ingredients(none, iv, &cov), (std::vector<float>{0, 0, 0}));
  EXPECT_EQ(cov.known, 0u);
  EXPECT_EQ(cov.unknown, 2u);
}

TEST(Ingredients, TastyLikeRecipeWithOneUnknown) {
  std::vector<Recipe> train = {
      make_recipe("t1", {"x"}, Split::kTrain, {"chicken breast", "soy sauce", "garlic"}),
      make_recipe("t2", {"x"}, Split::kTrain, {"green onion", "sesame oil", "garlic"})};
  const auto iv = build_ingredient_vocabulary(train);
  EXPECT_EQ(iv.size(), 5u);
  EXPECT_EQ(iv.entry(0), "garlic");  // most frequent first

  auto test = make_recipe("q", {"x"}, Split::kTest,
                          {"chicken breast", "soy sauce", "garlic", "green onion", "sesame oil",
                           "gochujang"});
  IngredientCoverage cov;
  const auto v = encode_ingredients(test, iv, &cov);
  float total = 0;
  for (float x : v) total += x;
  EXPECT_EQ(total, 5.0f);
  EXPECT_EQ(cov.known, 5u);
  EXPECT_EQ(cov.unknown, 1u);
}

TEST(Features, LoadsDeclaredShapeAndRejectsTruncation) {
  const auto dir = temp_dir("features");
  FeatureMatrix m(10, 4);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = 0.5f * float(i);
  write_features(dir / "ok.pcf", m);
  VideoManifest man{dir / "ok.pcf", 10, 4, {}};
  const auto loaded = load_features(man);
  EXPECT_EQ(loaded.rows, 10u);
  EXPECT_EQ(loaded.cols, 4u);
  EXPECT_EQ(loaded.at(9, 3), 0.5f * 39);

  fs::copy_file(dir / "ok.pcf", dir / "short.pcf");
  fs::resize_file(dir / "short.pcf", fs::file_size(dir / "ok.pcf") - 4);
  try {
    read_features(dir / "short.pcf");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("39"), std::string::npos) << e.what();
  }

  VideoManifest wrong{dir / "ok.pcf", 8, 5, {}};
  try {
    load_features(wrong);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(10, 4)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(8, 5)"), std::string::npos) << msg;
  }
  fs::remove_all(dir);
}

TEST(Features, WriteReadRoundTripIsBitIdentical) {
  const auto dir = temp_dir("roundtrip");
  std::mt19937 rng(77);
  std::normal_distribution<float> d(0, 100);
  for (int trial = 0; trial < 10; ++trial) {
    FeatureMatrix m(1 + rng() % 20, 1 + rng() % 9);
    for (auto& x : m.data) x = d(rng);
    m.data[0] = -0.0f;
    write_features(dir / "m.pcf", m);
    const auto back = read_features(dir / "m.pcf");
    ASSERT_EQ(back.rows, m.rows);
    ASSERT_EQ(back.cols, m.cols);
    EXPECT_EQ(std::memcmp(back.data.data(), m.data.data(), m.data.size() * sizeof(float)), 0);
  }
  fs::remove_all(dir);
}

TEST(LoadCorpus, ParsesLinesInOrderAndWarnsOnBadOnes) {
  const auto dir = temp_dir("jsonl");
  write_file(dir / "c.jsonl",
             R"({"id":"a","ingredients":["Salt","salt"],"steps":["Boil water."],"split":"train"})"
             "\n"
             R"({"id":"b","ingredients":[],"steps":["Chop.","Fry."],"split":"val"})"
             "\n\n"
             R"({"id":"c","ingredients":["egg"],"steps":["Whisk"],"split":"test"})"
             "\n");
  Diagnostics quiet(true);
  auto rs = load_corpus(dir / "c.jsonl", &quiet);
  ASSERT_EQ(rs.size(), 3u);
  EXPECT_EQ(rs[0].id, "a");
  EXPECT_EQ(rs[0].ingredients, (std::vector<std::string>{"salt"}));
  EXPECT_EQ(rs[1].split, Split::kVal);
  EXPECT_EQ(rs[2].id, "c");
  EXPECT_EQ(quiet.count(), 0u);

  write_file(dir / "bad.jsonl",
             R"({"id":"a","ingredients":[],"steps":[],"split":"train"})"
             "\n"
             "not json\n"
             R"({"id":"b","ingredients":[],"steps":[" . "],"split":"train"})"
             "\n"
             R"({"id":"c","ingredients":[],"steps":["   "],"split":"train"})"
             "\n");
  Diagnostics diag(true);
  rs = load_corpus(dir / "bad.jsonl", &diag);
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_EQ(rs[0].id, "b");
  ASSERT_EQ(diag.count(), 3u);
  EXPECT_NE(diag.warnings()[0].find(":1:"), std::string::npos);
  EXPECT_NE(diag.warnings()[1].find(":2:"), std::string::npos);
  EXPECT_NE(diag.warnings()[2].find(":4:"), std::string::npos);

  EXPECT_THROW(load_corpus(dir / "missing.jsonl"), DataError);
  fs::remove_all(dir);
}

TEST(LoadCorpus, VideoManifestResolvesRelativePathAndChecksSegments) {
  const auto dir = temp_dir("video");
  write_file(dir / "c.jsonl",
             R"({"id":"v","ingredients":[],"steps":["a","b"],"split":"train",)"
             R"("video":{"feature_file":"f.pcf","num_frames":20,"feature_dim":3,"segments":[[0,5],[7,20]]}})"
             "\n"
             R"({"id":"w","ingredients":[],"steps":["a","b"],"split":"train",)"
             R"("video":{"feature_file":"f.pcf","num_frames":20,"feature_dim":3,"segments":[[0,8],[7,20]]}})"
             "\n");
  Diagnostics diag(true);
  const auto rs = load_corpus(dir / "c.jsonl", &diag);
  ASSERT_EQ(rs.size(), 1u);
  ASSERT_TRUE(rs[0].video.has_value());
  EXPECT_EQ(rs[0].video->feature_file, dir / "f.pcf");
  EXPECT_EQ(rs[0].video->segments[1], (Segment{7, 20}));
  EXPECT_EQ(diag.count(), 1u);

  const auto j = recipe_to_json(rs[0], dir);
  EXPECT_EQ(j["video"]["feature_file"], "f.pcf");
  fs::remove_all(dir);
}
