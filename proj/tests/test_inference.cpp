#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "procap/corpus/fixtures.hpp"
#include "procap/inference/anticipate.hpp"
#include "procap/inference/segmentation.hpp"

using namespace procap;
using namespace procap::infer;
using corpus::Segment;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("procap_test_inference_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

// Toy corpus on disk plus vocabularies and a small randomly initialized model.
struct ToyWorld {
  std::filesystem::path dir;
  std::vector<corpus::Recipe> recipes;
  corpus::Vocabulary vocab;
  corpus::IngredientVocabulary iv;
  model::Model<float> model;

  static model::ModelConfig config(std::size_t vocab, std::size_t ing) {
    model::ModelConfig c;
    c.vocab_size = vocab;
    c.ingredient_size = ing;
    c.embed_dim = 6;
    c.encoder_hidden = 4;
    c.recipe_hidden = 8;
    c.decoder_hidden = 7;
    c.feature_dim = 16;
    return c;
  }

  explicit ToyWorld(const std::string& name)
      : dir(temp_dir(name)),
        recipes((corpus::write_toy_fixture(dir), corpus::load_corpus(dir / "recipes.jsonl"))),
        vocab(corpus::build_vocabulary(recipes, 1000)),
        iv(corpus::build_ingredient_vocabulary(recipes)),
        model(config(vocab.size(), iv.size())) {
    model.initialize(7);
  }

  Vocabularies vocabularies() const { return {&vocab, &iv}; }
};

}  // namespace

// ---- segmentation ----

TEST(FixedWindows, WindowLongerThanVideo) {
  EXPECT_EQ(fixed_windows(100, 170), (std::vector<Segment>{{0, 100}}));
}

TEST(FixedWindows, PartitionWithPartialTail) {
  EXPECT_EQ(fixed_windows(400, 170), (std::vector<Segment>{{0, 170}, {170, 340}, {340, 400}}));
}

TEST(FixedWindows, CoverObservedRangeWithoutGapsOrOverlaps) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t obs = rng() % 2000, w = 1 + rng() % 300;
    const auto segs = fixed_windows(obs, w);
    std::size_t cursor = 0;
    for (const auto& s : segs) {
      ASSERT_EQ(s.start, cursor);
      ASSERT_GT(s.end, s.start);
      ASSERT_LE(s.length(), w);
      cursor = s.end;
    }
    EXPECT_EQ(cursor, obs);
  }
}

TEST(FixedWindows, ZeroWidthRejected) {
  EXPECT_THROW(fixed_windows(10, 0), Error);
  EXPECT_THROW(SegmentationStrategy::window(0), Error);
}

TEST(Iou, Examples) {
  EXPECT_DOUBLE_EQ(iou({0, 10}, {6, 20}), 0.2);
  EXPECT_DOUBLE_EQ(iou({0, 10}, {0, 10}), 1.0);
  EXPECT_DOUBLE_EQ(iou({0, 10}, {10, 20}), 0.0);
}

TEST(Proposals, ThresholdIouDiscardsShorter) {
  // IoU([0,10), [6,20)) = 4/20 = 0.2: the longer [6,20) survives alone.
  EXPECT_EQ(normalize_proposals({{0, 10}, {6, 20}}, 100), (std::vector<Segment>{{6, 20}}));
}

TEST(Proposals, OverlapBelowThresholdSplitByLength) {
  // IoU = 10/100. The 10-frame overlap [30,40) is shared 40:70, so the first
  // proposal keeps round(10 * 40/110) = 4 frames of it.
  EXPECT_EQ(normalize_proposals({{0, 40}, {30, 100}}, 200), (std::vector<Segment>{{0, 34}, {34, 100}}));
  // Overlap of 2 between lengths 10 and 12: round(2 * 10/22) = 1.
  EXPECT_EQ(normalize_proposals({{8, 20}, {0, 10}}, 50), (std::vector<Segment>{{0, 9}, {9, 20}}));
}

TEST(Proposals, ContainedProposalDropped) {
  EXPECT_EQ(normalize_proposals({{0, 100}, {40, 50}}, 200), (std::vector<Segment>{{0, 100}}));
}

TEST(Proposals, ClippedToObservation) {
  EXPECT_EQ(normalize_proposals({{0, 30}, {40, 90}, {120, 150}}, 60), (std::vector<Segment>{{0, 30}, {40, 60}}));
}

TEST(Proposals, NormalizedOutputIsSortedAndDisjoint) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Segment> raw;
    for (int k = 0; k < 8; ++k) {
      const std::size_t a = rng() % 500;
      raw.push_back({a, a + 1 + rng() % 120});
    }
    const auto out = normalize_proposals(raw, 400);
    for (std::size_t i = 0; i < out.size(); ++i) {
      ASSERT_LT(out[i].start, out[i].end);
      ASSERT_LE(out[i].end, 400u);
      if (i > 0) ASSERT_LE(out[i - 1].end, out[i].start);
    }
  }
}

TEST(Proposals, FileParsing) {
  const auto d = temp_dir("proposals");
  write_file(d / "ok.json", "[[0, 10], [12, 30]]");
  EXPECT_EQ(load_proposals(d / "ok.json"), (std::vector<Segment>{{0, 10}, {12, 30}}));
  write_file(d / "broken.json", "[[0, 10], [12");
  EXPECT_THROW(load_proposals(d / "broken.json"), DataError);
  write_file(d / "object.json", "{\"a\": 1}");
  EXPECT_THROW(load_proposals(d / "object.json"), DataError);
  write_file(d / "reversed.json", "[[10, 5]]");
  EXPECT_THROW(load_proposals(d / "reversed.json"), DataError);
  write_file(d / "triple.json", "[[1, 2, 3]]");
  EXPECT_THROW(load_proposals(d / "triple.json"), DataError);
  EXPECT_THROW(load_proposals(d / "missing.json"), DataError);
}

TEST(Strategy, Parse) {
  EXPECT_EQ(SegmentationStrategy::parse("gt").kind, SegmentationStrategy::Kind::kGroundTruth);
  const auto w = SegmentationStrategy::parse("window:170");
  EXPECT_EQ(w.kind, SegmentationStrategy::Kind::kFixedWindow);
  EXPECT_EQ(w.width, 170u);
  EXPECT_EQ(w.describe(), "window:170");
  const auto p = SegmentationStrategy::parse("proposals:some/dir");
  EXPECT_EQ(p.kind, SegmentationStrategy::Kind::kProposals);
  EXPECT_EQ(p.proposals_dir, std::filesystem::path("some/dir"));
  for (const char* bad : {"", "window", "window:", "window:x1", "window:0", "proposals:", "oracle"}) {
    EXPECT_THROW(SegmentationStrategy::parse(bad), Error) << bad;
  }
}

TEST(SegmentVideo, GroundTruthKeepsCompletedSegments) {
  corpus::VideoManifest m;
  m.num_frames = 100;
  m.segments = {{0, 20}, {25, 50}, {60, 90}};
  EXPECT_EQ(segment_video(m, SegmentationStrategy::ground_truth(), 50), (std::vector<Segment>{{0, 20}, {25, 50}}));
  EXPECT_EQ(segment_video(m, SegmentationStrategy::ground_truth(), 100).size(), 3u);
  EXPECT_EQ(segment_video(m, SegmentationStrategy::window(40), 100),
            (std::vector<Segment>{{0, 40}, {40, 80}, {80, 100}}));
  EXPECT_THROW(segment_video(m, SegmentationStrategy::ground_truth(), 101), DataError);
}

TEST(SegmentVideo, ProposalsReadPerRecipe) {
  const auto d = temp_dir("per_recipe");
  write_file(d / "r1.json", "[[0, 10], [6, 20], [30, 45]]");
  corpus::VideoManifest m;
  m.num_frames = 40;
  EXPECT_EQ(segment_video(m, SegmentationStrategy::proposals(d), 40, "r1"),
            (std::vector<Segment>{{6, 20}, {30, 40}}));
  EXPECT_THROW(segment_video(m, SegmentationStrategy::proposals(d), 40, "r2"), DataError);
}

TEST(MeanIou, BestMatchPerGroundTruthSegment) {
  EXPECT_DOUBLE_EQ(mean_iou({{0, 10}, {10, 20}}, {{0, 10}}), 0.5);
  EXPECT_DOUBLE_EQ(mean_iou({{0, 10}}, {{0, 5}, {0, 20}}), 0.5);
  EXPECT_DOUBLE_EQ(mean_iou({}, {{0, 5}}), 0.0);
}

// ---- anticipation ----

TEST(Decode, Parse) {
  EXPECT_EQ(DecodeOptions::parse("greedy").beam, 0u);
  EXPECT_EQ(DecodeOptions::parse("beam5").beam, 5u);
  EXPECT_EQ(DecodeOptions::parse("beam5").describe(), "beam5");
  for (const char* bad : {"beam", "beam0", "beamx", "sample"}) EXPECT_THROW(DecodeOptions::parse(bad), Error);
}

TEST(Anticipate, RowsAndTargetsAlignToGroundTruthSteps) {
  ToyWorld w("align");
  const corpus::Recipe* seven = nullptr;
  for (const auto& r : w.recipes) {
    if (r.steps.size() == 7) seven = &r;
  }
  ASSERT_NE(seven, nullptr);
  AnticipateOptions opt;
  opt.horizons = 4;
  const auto trace = anticipate(*seven, w.model, w.vocabularies(), opt);
  ASSERT_EQ(trace.rows.size(), 7u);
  for (std::size_t j = 0; j < 7; ++j) {
    const auto& row = trace.rows[j];
    EXPECT_EQ(row.observed, j);
    EXPECT_EQ(row.predictions.size(), std::min<std::size_t>(4, 7 - j));
    for (std::size_t k = 0; k < row.predictions.size(); ++k) {
      EXPECT_EQ(row.predictions[k].horizon, k + 1);
      EXPECT_EQ(row.predictions[k].target_step, j + k + 1);
    }
  }
  EXPECT_EQ(trace.rows[3].predictions[1].target_step, 5u);
}

TEST(Anticipate, FirstRowDependsOnlyOnIngredients) {
  ToyWorld w("ingredients_only");
  corpus::Recipe a = w.recipes[0];
  corpus::Recipe b = a;
  b.steps = {"bake and serve hot", "season with pepper", "slice the cheese"};
  AnticipateOptions opt;
  opt.horizons = 1;
  const auto ta = anticipate(a, w.model, w.vocabularies(), opt);
  const auto tb = anticipate(b, w.model, w.vocabularies(), opt);
  EXPECT_EQ(ta.rows[0].predictions[0].tokens, tb.rows[0].predictions[0].tokens);
  EXPECT_EQ(ta.rows[0].predictions[0].logprob, tb.rows[0].predictions[0].logprob);
  EXPECT_EQ(ta.rows[0].predictions[0].rhat_norm, tb.rows[0].predictions[0].rhat_norm);
}

TEST(Anticipate, LaterHorizonsFollowPredictedInputs) {
  ToyWorld w("closed_loop");
  const corpus::Recipe& r = w.recipes[0];
  AnticipateOptions opt;
  opt.horizons = 4;
  const auto trace = anticipate(r, w.model, w.vocabularies(), opt);

  // Independent rollout: feed j encoded steps, then h-1 predictions.
  const std::size_t j = 2;
  ad::Graph<float> g;
  const auto ing = corpus::encode_ingredients(r, w.iv);
  auto [state, r0] = model::init_from_ingredients(g, w.model, std::span<const float>(ing));
  for (std::size_t s = 0; s < j; ++s) {
    const auto ids = w.vocab.encode(corpus::tokenize(r.steps[s]));
    state = model::advance(state, model::encode_sentence<float>(g, w.model, ids), w.model);
  }
  for (std::size_t h = 1; h <= 4; ++h) {
    const auto pred = state.prediction();
    const auto hyp = model::decode_greedy(std::span<const float>(pred.vector.value()), w.model, 30);
    EXPECT_EQ(trace.rows[j].predictions[h - 1].tokens, hyp.words()) << "horizon " << h;
    EXPECT_DOUBLE_EQ(trace.rows[j].predictions[h - 1].logprob, hyp.logprob);
    state = model::advance(state, pred, w.model);
  }
}

TEST(Anticipate, TextAndVideoTracesHaveTheSameShape) {
  ToyWorld w("shapes");
  AnticipateOptions text, video;
  video.modality = Modality::kVideo;
  for (const auto& r : w.recipes) {
    const auto a = anticipate(r, w.model, w.vocabularies(), text);
    const auto b = anticipate(r, w.model, w.vocabularies(), video);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t j = 0; j < a.rows.size(); ++j) {
      ASSERT_EQ(a.rows[j].predictions.size(), b.rows[j].predictions.size());
      for (std::size_t k = 0; k < a.rows[j].predictions.size(); ++k) {
        EXPECT_EQ(a.rows[j].predictions[k].target_step, b.rows[j].predictions[k].target_step);
      }
    }
    EXPECT_EQ(a.context_items, b.context_items);
  }
}

TEST(Anticipate, WindowStrategyCapsRowsByConsumedSegments) {
  ToyWorld w("windows");
  AnticipateOptions opt;
  opt.modality = Modality::kVideo;
  opt.strategy = SegmentationStrategy::window(1000000);
  const auto& r = w.recipes[0];
  const auto trace = anticipate(r, w.model, w.vocabularies(), opt);
  EXPECT_EQ(trace.context_items, 1u);
  ASSERT_EQ(trace.rows.size(), 2u);  // j = 0 and j = 1
  EXPECT_EQ(trace.rows[1].predictions.front().target_step, 2u);
}

TEST(Anticipate, StrategyModalityCombinationsChecked) {
  ToyWorld w("combos");
  AnticipateOptions opt;
  opt.strategy = SegmentationStrategy::window(40);
  EXPECT_THROW(anticipate(w.recipes[0], w.model, w.vocabularies(), opt), Error);
  opt.modality = Modality::kVideoText;
  EXPECT_THROW(anticipate(w.recipes[0], w.model, w.vocabularies(), opt), Error);
  corpus::Recipe no_video = w.recipes[0];
  no_video.video.reset();
  opt.modality = Modality::kVideo;
  EXPECT_THROW(anticipate(no_video, w.model, w.vocabularies(), opt), DataError);
}

TEST(Anticipate, ThreadPoolPreservesOrderAndValues) {
  ToyWorld w("threads");
  std::vector<const corpus::Recipe*> all;
  for (const auto& r : w.recipes) all.push_back(&r);
  AnticipateOptions opt;
  opt.modality = Modality::kVideo;
  const auto one = anticipate_all(all, w.model, w.vocabularies(), opt, 1);
  const auto four = anticipate_all(all, w.model, w.vocabularies(), opt, 4);
  ASSERT_EQ(one.size(), four.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    EXPECT_EQ(nlohmann::json(one[i]).dump(), nlohmann::json(four[i]).dump());
  }
}

TEST(Trace, JsonRoundTrip) {
  ToyWorld w("json");
  AnticipateOptions opt;
  opt.decode = DecodeOptions::parse("beam3");
  const auto t = anticipate(w.recipes[1], w.model, w.vocabularies(), opt);
  const nlohmann::json j = t;
  const auto back = j.get<PredictionTrace>();
  EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
  EXPECT_EQ(back.decode, "beam3");
}
