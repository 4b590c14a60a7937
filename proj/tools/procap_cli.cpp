#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "procap/corpus/fixtures.hpp"
#include "procap/corpus/recipe.hpp"
#include "procap/corpus/vocabulary.hpp"
#include "procap/inference/anticipate.hpp"
#include "procap/inference/segmentation.hpp"
#include "procap/io/bundle.hpp"
#include "procap/log.hpp"
#include "procap/metrics/report.hpp"
#include "procap/training/trainer.hpp"
#include "run_manifest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace procap;

namespace {

const fs::path kDataDir = PROCAP_DATA_DIR;

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw DataError("cannot read config file " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw DataError("malformed config file " + path + ": " + e.what());
  }
}

// Looks up a dotted path such as "anticipate.window".
const json* config_value(const json& cfg, const std::string& dotted) {
  const json* node = &cfg;
  std::size_t pos = 0;
  while (pos <= dotted.size()) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!node->is_object() || !node->contains(key)) return nullptr;
    node = &node->at(key);
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return node;
}

template <class T>
T pick(const std::optional<T>& flag, const json& cfg, const std::string& dotted, T fallback) {
  if (flag) return *flag;
  if (const json* v = config_value(cfg, dotted)) return v->get<T>();
  return fallback;
}

// Flag, then PROCAP_SEED, then the config file, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, const json& cfg, const std::string& dotted) {
  if (flag) return *flag;
  if (const char* env = std::getenv("PROCAP_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(std::string("PROCAP_SEED must be an unsigned integer, got '") + env + "'");
    }
  }
  if (const json* v = config_value(cfg, dotted)) return v->get<std::uint64_t>();
  return 0;
}

std::vector<corpus::Recipe> load_recipes(const fs::path& path, bool quiet) {
  Diagnostics diag(quiet);
  auto recipes = corpus::load_corpus(path, &diag);
  if (recipes.empty()) throw DataError("corpus " + path.string() + " holds no valid recipes");
  return recipes;
}

std::vector<const corpus::Recipe*> select(const std::vector<corpus::Recipe>& recipes, const std::string& split) {
  std::vector<const corpus::Recipe*> out;
  for (const auto& r : recipes) {
    const bool keep = split == "all" || (split == "heldout" && r.split != corpus::Split::kTrain) ||
                      split == corpus::to_string(r.split);
    if (keep) out.push_back(&r);
  }
  if (out.empty()) throw DataError("no recipes in split '" + split + "'");
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

std::string horizon_label(std::size_t h) { return h == 1 ? "next" : "next+" + std::to_string(h - 1); }

std::string fmt(double v, int prec = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

void print_horizons(const metrics::MetricReport& rep) {
  std::cout << "horizon   support  BLEU1   BLEU4   METEOR  ingr.recall  verb.recall\n";
  for (const auto& c : rep.horizons) {
    auto recall = [](const std::optional<double>& r) { return r ? fmt(*r, 3) : std::string("  -  "); };
    std::printf("%-8s  %7zu  %6s  %6s  %6s  %11s  %11s\n", horizon_label(c.horizon).c_str(), c.support,
                fmt(c.bleu1()).c_str(), fmt(c.bleu4()).c_str(), fmt(c.meteor()).c_str(),
                recall(c.ingredient_recall()).c_str(), recall(c.verb_recall()).c_str());
  }
}

// Parses "30:230:20" (inclusive range) or "70,170".
std::vector<std::size_t> parse_widths(const std::string& spec) {
  std::vector<std::size_t> out;
  auto number = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos || std::stoul(s) == 0) {
      throw Error("bad window width '" + s + "' in '" + spec + "'");
    }
    return static_cast<std::size_t>(std::stoul(s));
  };
  if (spec.find(':') != std::string::npos) {
    const auto a = spec.find(':'), b = spec.find(':', a + 1);
    if (b == std::string::npos) throw Error("width range must be start:stop:step, got '" + spec + "'");
    const std::size_t lo = number(spec.substr(0, a)), hi = number(spec.substr(a + 1, b - a - 1)),
                      step = number(spec.substr(b + 1));
    if (lo > hi) throw Error("empty width range '" + spec + "'");
    for (std::size_t w = lo; w <= hi; w += step) out.push_back(w);
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const auto comma = spec.find(',', pos);
      out.push_back(number(spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  return out;
}

std::vector<infer::PredictionTrace> read_traces(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read traces " + path.string());
  std::vector<infer::PredictionTrace> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<infer::PredictionTrace>());
    } catch (const json::exception& e) {
      throw DataError("traces " + path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_traces(const fs::path& path, const std::vector<infer::PredictionTrace>& traces) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  for (const auto& t : traces) os << json(t).dump() << '\n';
}

std::size_t corpus_feature_dim(const std::vector<corpus::Recipe>& recipes) {
  for (const auto& r : recipes) {
    if (r.video) return r.video->feature_dim;
  }
  return 0;
}

// ---- commands ----

struct BuildVocabArgs {
  std::string corpus, out, config;
  std::optional<std::size_t> max_words;
  std::size_t max_ingredients = 0;
  bool quiet = false;
};

void cmd_build_vocab(const BuildVocabArgs& a, cli::RunManifest& manifest) {
  const json cfg = load_config(a.config);
  const std::size_t max_words = pick<std::size_t>(a.max_words, cfg, "vocab.max_words", 30171);
  const auto recipes = load_recipes(a.corpus, a.quiet);
  const auto vocab = corpus::build_vocabulary(recipes, max_words);
  const auto iv = corpus::build_ingredient_vocabulary(recipes, a.max_ingredients);
  const fs::path out = a.out;
  fs::create_directories(out);
  corpus::save_text(out / "vocab.txt", vocab);
  corpus::save_text(out / "ingredients.txt", iv);
  manifest.set_config({{"max_words", max_words}, {"max_ingredients", a.max_ingredients}});
  manifest.add_input(a.corpus);
  if (!a.config.empty()) manifest.add_input(a.config);
  manifest.add_output(out / "vocab.txt");
  manifest.add_output(out / "ingredients.txt");
  manifest.write(out);
  std::cout << "vocabulary: " << vocab.size() << " entries (4 reserved), " << iv.size() << " ingredients\n";
}

struct TrainArgs {
  std::string stage = "text", corpus, vocab, pretrained, out, config, selection;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> alpha, lr;
  std::optional<std::uint64_t> seed;
  bool no_ing = false, recipe_loss = false, no_sampling = false, quiet = false;
};

void cmd_train(const TrainArgs& a, cli::RunManifest& manifest) {
  const json cfg = load_config(a.config);
  const model::Stage stage = model::parse_stage(a.stage);
  const std::string stage_key = model::to_string(stage);

  train::TrainConfig tc;
  tc.stage = stage;
  const json* section = config_value(cfg, "train." + stage_key);
  if (section == nullptr && stage == model::Stage::kVideoText) section = config_value(cfg, "train.video");
  if (section != nullptr) train::merge_json(*section, tc);
  tc.stage = stage;
  if (a.epochs) tc.epochs = a.epochs;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.alpha) tc.alpha = *a.alpha;
  if (a.lr) tc.lr = *a.lr;
  if (a.no_ing) tc.no_ingredients = true;
  if (a.recipe_loss) {
    if (stage == model::Stage::kText) {
      tc.use_recipe_loss = true;
    } else {
      tc.video_recipe_loss = true;
    }
  }
  if (a.no_sampling) tc.sampling.enabled = false;
  if (!a.selection.empty()) tc.selection = train::parse_selection(a.selection);
  tc.seed = resolve_seed(a.seed, cfg, "train.seed");
  tc.validate();

  const auto recipes = load_recipes(a.corpus, a.quiet);
  Diagnostics diag(a.quiet);
  std::optional<io::ModelBundle> pretrained;
  corpus::Vocabulary vocab;
  corpus::IngredientVocabulary iv;
  model::ModelConfig mc;
  if (stage == model::Stage::kText) {
    if (a.vocab.empty()) throw Error("--vocab DIR (from build-vocab) is required for the text stage");
    vocab = corpus::load_text<corpus::Vocabulary>(fs::path(a.vocab) / "vocab.txt");
    iv = corpus::load_text<corpus::IngredientVocabulary>(fs::path(a.vocab) / "ingredients.txt");
    if (const json* m = config_value(cfg, "model")) io::merge_model_config(*m, mc);
    if (const std::size_t fd = corpus_feature_dim(recipes)) mc.feature_dim = fd;
    mc.vocab_size = vocab.size();
    mc.ingredient_size = iv.size();
  } else {
    if (a.pretrained.empty()) throw Error("--pretrained CHECKPOINT is required for video stages");
    pretrained = io::load_bundle(a.pretrained);
    vocab = pretrained->vocab;
    iv = pretrained->ingredients;
    mc = pretrained->model.config();
    if (pretrained->metadata.contains("train_config")) {
      tc.no_ingredients = tc.no_ingredients || pretrained->metadata.at("train_config").value("no_ing", false);
    }
  }

  train::TrainData data;
  data.train = train::prepare_recipes(corpus::select_split(recipes, corpus::Split::kTrain), vocab, iv, stage,
                                      mc.max_sentence_tokens, &diag);
  data.val = train::prepare_recipes(corpus::select_split(recipes, corpus::Split::kVal), vocab, iv, stage,
                                    mc.max_sentence_tokens, &diag);

  const fs::path out = a.out;
  train::TrainHooks hooks;
  hooks.out_dir = out;
  hooks.metadata = io::vocabulary_metadata(vocab, iv);
  hooks.metadata["stage"] = stage_key;
  hooks.diag = &diag;
  const std::size_t epochs = tc.resolved_epochs();
  if (!a.quiet) {
    hooks.on_epoch = [epochs](const train::EpochRecord& e) {
      std::cerr << "epoch " << e.epoch << "/" << epochs << "  L_d " << fmt(e.decoder_loss, 4) << "  L_r "
                << fmt(e.recipe_loss, 4);
      if (e.val_decoder_loss) std::cerr << "  val L_d " << fmt(*e.val_decoder_loss, 4);
      std::cerr << "  (" << fmt(e.wall_seconds, 2) << "s)\n";
    };
  }
  const train::TrainResult res = stage == model::Stage::kText
                                     ? train::train_text(mc, data, tc, hooks)
                                     : train::train_video(pretrained->model, data, tc, hooks);

  const auto final_train = train::evaluate_loss(res.model, data.train, stage, tc.no_ingredients);
  json summary = {{"stage", stage_key},
                  {"epochs", epochs},
                  {"train_recipes", data.train.size()},
                  {"val_recipes", data.val.size()},
                  {"initial_train_decoder_loss", res.log.initial_train.decoder},
                  {"final_train_decoder_loss", final_train.decoder},
                  {"selected_epoch", res.log.selected_epoch},
                  {"warnings", diag.warnings()}};
  if (res.log.initial_val_decoder_loss) summary["initial_val_decoder_loss"] = *res.log.initial_val_decoder_loss;
  write_text(out / "train_summary.json", summary.dump(2) + "\n");

  manifest.set_config({{"train", tc}, {"model", mc}});
  manifest.set_seed(tc.seed);
  manifest.add_input(a.corpus);
  if (!a.vocab.empty()) manifest.add_input(a.vocab);
  if (!a.pretrained.empty()) manifest.add_input(a.pretrained);
  if (!a.config.empty()) manifest.add_input(a.config);
  for (const char* f : {"model.ckpt", "last.ckpt", "best.ckpt", "train_log.jsonl", "train_summary.json"}) {
    if (fs::exists(out / f)) manifest.add_output(out / f);
  }
  manifest.write(out);
  std::cout << "trained " << stage_key << " stage for " << epochs << " epochs on " << data.train.size()
            << " recipes; train L_d " << fmt(res.log.initial_train.decoder, 4) << " -> " << fmt(final_train.decoder, 4)
            << "; selected epoch " << res.log.selected_epoch << "\n";
}

struct AnticipateArgs {
  std::string checkpoint, corpus, split = "test", modality = "text", strategy, decode, out, config;
  std::optional<std::size_t> horizons;
  std::size_t threads = 1;
  bool quiet = false;
};

infer::AnticipateOptions anticipate_options(const AnticipateArgs& a, const json& cfg, const io::ModelBundle& b) {
  infer::AnticipateOptions opt;
  opt.modality = infer::parse_modality(a.modality);
  std::string strategy = a.strategy;
  if (strategy.empty()) {
    strategy = opt.modality == infer::Modality::kVideo
                   ? "window:" + std::to_string(pick<std::size_t>(std::nullopt, cfg, "anticipate.window", 170))
                   : "gt";
  }
  opt.strategy = infer::SegmentationStrategy::parse(strategy);
  opt.horizons = pick<std::size_t>(a.horizons, cfg, "anticipate.horizons", 4);
  opt.decode = infer::DecodeOptions::parse(
      a.decode.empty() ? pick<std::string>(std::nullopt, cfg, "anticipate.decode", "greedy") : a.decode);
  if (b.metadata.contains("train_config")) opt.no_ingredients = b.metadata.at("train_config").value("no_ing", false);
  return opt;
}

void cmd_anticipate(const AnticipateArgs& a, cli::RunManifest& manifest) {
  const json cfg = load_config(a.config);
  const io::ModelBundle b = io::load_bundle(a.checkpoint);
  const auto opt = anticipate_options(a, cfg, b);
  const auto recipes = load_recipes(a.corpus, a.quiet);
  const auto chosen = select(recipes, a.split);
  const auto traces = infer::anticipate_all(chosen, b.model, {&b.vocab, &b.ingredients}, opt, a.threads);

  const fs::path out = a.out;
  fs::create_directories(out);
  write_traces(out / "traces.jsonl", traces);
  json settings = {{"split", a.split},
                   {"modality", infer::to_string(opt.modality)},
                   {"strategy", opt.strategy.describe()},
                   {"decode", opt.decode.describe()},
                   {"horizons", opt.horizons},
                   {"threads", a.threads}};
  if (opt.modality == infer::Modality::kVideo && opt.strategy.kind != infer::SegmentationStrategy::Kind::kGroundTruth) {
    double total = 0;
    for (const auto* r : chosen) {
      const auto segs = infer::segment_video(*r->video, opt.strategy, r->video->num_frames, r->id);
      total += infer::mean_iou(r->video->segments, segs);
    }
    const double miou = total / double(chosen.size());
    write_text(out / "segmentation.json", json{{"strategy", opt.strategy.describe()}, {"mean_iou", miou}}.dump(2) + "\n");
    manifest.add_output(out / "segmentation.json");
    std::cout << "segmentation " << opt.strategy.describe() << ": mean IoU " << fmt(100 * miou) << "%\n";
  }
  manifest.set_config(settings);
  manifest.add_input(a.checkpoint);
  manifest.add_input(a.corpus);
  if (!a.config.empty()) manifest.add_input(a.config);
  manifest.add_output(out / "traces.jsonl");
  manifest.write(out);
  std::size_t n = 0;
  for (const auto& t : traces) {
    for (const auto& row : t.rows) n += row.predictions.size();
  }
  std::cout << "anticipated " << n << " step sentences for " << traces.size() << " recipes ("
            << infer::to_string(opt.modality) << ", " << opt.strategy.describe() << ", " << opt.decode.describe()
            << ")\n";
}

struct EvaluateArgs {
  std::string traces, corpus, ingredient_vocab, verb_lexicon, mode = "exact", out;
  bool quiet = false;
};

void cmd_evaluate(const EvaluateArgs& a, cli::RunManifest& manifest) {
  const auto mode = metrics::parse_match_mode(a.mode);
  const auto traces = read_traces(a.traces);
  const auto recipes = load_recipes(a.corpus, a.quiet);
  const auto iv = corpus::load_text<corpus::IngredientVocabulary>(a.ingredient_vocab);
  const fs::path lex_path = a.verb_lexicon.empty() ? kDataDir / "verb_lexicon.txt" : fs::path(a.verb_lexicon);
  const auto lex = metrics::VerbLexicon::load(lex_path);
  const metrics::Scorer scorer(iv, lex);
  const auto report = metrics::aggregate(traces, recipes, scorer, mode);

  const fs::path out = a.out;
  fs::create_directories(out);
  write_text(out / "report.json", metrics::report_to_json(report).dump(2) + "\n");
  write_text(out / "report.csv", metrics::report_to_csv(report));
  manifest.set_config({{"mode", metrics::to_string(mode)}});
  manifest.add_input(a.traces);
  manifest.add_input(a.corpus);
  manifest.add_input(a.ingredient_vocab);
  manifest.add_input(lex_path);
  manifest.add_output(out / "report.json");
  manifest.add_output(out / "report.csv");
  manifest.write(out);
  print_horizons(report);
}

struct SweepArgs {
  std::string checkpoint, corpus, widths = "30:230:20", split = "val", decode, out, config, verb_lexicon;
  std::optional<std::size_t> horizons;
  std::size_t threads = 1;
  bool quiet = false;
};

void cmd_sweep_window(const SweepArgs& a, cli::RunManifest& manifest) {
  const json cfg = load_config(a.config);
  const io::ModelBundle b = io::load_bundle(a.checkpoint);
  const auto widths = parse_widths(a.widths);
  const auto recipes = load_recipes(a.corpus, a.quiet);
  const auto chosen = select(recipes, a.split);
  const fs::path lex_path = a.verb_lexicon.empty() ? kDataDir / "verb_lexicon.txt" : fs::path(a.verb_lexicon);
  const auto lex = metrics::VerbLexicon::load(lex_path);
  const metrics::Scorer scorer(b.ingredients, lex);

  AnticipateArgs aa;
  aa.modality = "video";
  aa.decode = a.decode;
  aa.horizons = a.horizons;
  infer::AnticipateOptions opt = anticipate_options(aa, cfg, b);

  std::vector<metrics::MetricReport> reports;
  json detail = json::array();
  for (std::size_t w : widths) {
    opt.strategy = infer::SegmentationStrategy::window(w);
    const auto traces = infer::anticipate_all(chosen, b.model, {&b.vocab, &b.ingredients}, opt, a.threads);
    reports.push_back(metrics::aggregate(traces, recipes, scorer));
    detail.push_back({{"width", w}, {"report", metrics::report_to_json(reports.back())}});
    if (!a.quiet) std::cerr << "width " << w << ": BLEU4 " << fmt(reports.back().overall.bleu4()) << "\n";
  }

  std::string csv = "horizon";
  for (std::size_t w : widths) csv += ",w" + std::to_string(w);
  csv += "\n";
  for (std::size_t h = 1; h <= opt.horizons; ++h) {
    csv += horizon_label(h);
    for (const auto& r : reports) {
      const auto* c = r.find_horizon(h);
      csv += "," + (c ? metrics::detail::fixed(c->bleu4()) : std::string());
    }
    csv += "\n";
  }
  csv += "all";
  std::size_t best = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    csv += "," + metrics::detail::fixed(reports[i].overall.bleu4());
    if (reports[i].overall.bleu4() > reports[best].overall.bleu4()) best = i;
  }
  csv += "\n";

  const fs::path out = a.out;
  fs::create_directories(out);
  write_text(out / "sweep.csv", csv);
  write_text(out / "sweep.json",
             json{{"split", a.split}, {"best_width", widths[best]}, {"widths", detail}}.dump(2) + "\n");
  manifest.set_config({{"widths", widths}, {"split", a.split}, {"decode", opt.decode.describe()}, {"horizons", opt.horizons}});
  manifest.add_input(a.checkpoint);
  manifest.add_input(a.corpus);
  manifest.add_input(lex_path);
  manifest.add_output(out / "sweep.csv");
  manifest.add_output(out / "sweep.json");
  manifest.write(out);
  std::cout << csv << "best width by overall BLEU4: " << widths[best] << "\n";
}

struct FixtureArgs {
  std::string out = (kDataDir / "toy").string();
  std::optional<std::uint64_t> seed;
};

void cmd_make_fixtures(const FixtureArgs& a, cli::RunManifest& manifest) {
  corpus::ToyFixtureOptions opt;
  if (a.seed) opt.seed = *a.seed;
  corpus::write_toy_fixture(a.out, opt);
  manifest.set_seed(opt.seed);
  manifest.add_output(fs::path(a.out) / "recipes.jsonl");
  manifest.add_output(fs::path(a.out) / "config.json");
  manifest.write(a.out);
  std::cout << "wrote toy corpus to " << a.out << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"procap: anticipate future recipe steps from text and video context"};
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  BuildVocabArgs bv;
  auto* c_vocab = app.add_subcommand("build-vocab", "Build word and ingredient vocabularies from the training split");
  c_vocab->add_option("--corpus", bv.corpus, "Recipe corpus (JSON lines)")->required()->check(CLI::ExistingFile);
  c_vocab->add_option("--max-words", bv.max_words, "Vocabulary size including 4 reserved tokens (30171 at full scale)");
  c_vocab->add_option("--max-ingredients", bv.max_ingredients, "Ingredient vocabulary size (0 keeps all)");
  c_vocab->add_option("--out", bv.out, "Output directory")->required();
  c_vocab->add_option("--config", bv.config, "JSON config file")->check(CLI::ExistingFile);
  c_vocab->add_flag("--quiet", bv.quiet, "Suppress warnings on stderr");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the text stage or ground the video encoder");
  c_train->add_option("--stage", tr.stage, "text, video or video-text")
      ->check(CLI::IsMember({"text", "video", "video-text"}));
  c_train->add_option("--corpus", tr.corpus, "Recipe corpus (JSON lines)")->required()->check(CLI::ExistingFile);
  c_train->add_option("--vocab", tr.vocab, "Directory written by build-vocab (text stage)");
  c_train->add_option("--pretrained", tr.pretrained, "Text-stage checkpoint (video stages)");
  c_train->add_option("--epochs", tr.epochs, "Epochs (default 50 text, 10 text with L_r, 25 video)");
  c_train->add_option("--batch-size", tr.batch_size, "Recipes per batch (default 50)");
  c_train->add_option("--lr", tr.lr, "Adam learning rate (default 0.001)");
  c_train->add_option("--alpha", tr.alpha, "Weight of the recipe loss L_r (default 0.1)");
  c_train->add_flag("--recipe-loss", tr.recipe_loss, "Optimize L_d + alpha * L_r instead of L_d");
  c_train->add_flag("--no-ing", tr.no_ing, "Start the recipe RNN from a learned vector instead of ingredients");
  c_train->add_flag("--no-sampling", tr.no_sampling, "Disable scheduled sampling");
  c_train->add_option("--selection", tr.selection, "best_val or last")->check(CLI::IsMember({"best_val", "last"}));
  c_train->add_option("--seed", tr.seed, "Random seed (falls back to PROCAP_SEED)");
  c_train->add_option("--out", tr.out, "Output directory")->required();
  c_train->add_option("--config", tr.config, "JSON config file")->check(CLI::ExistingFile);
  c_train->add_flag("--quiet", tr.quiet, "No per-epoch progress or warnings");

  AnticipateArgs an;
  auto* c_ant = app.add_subcommand("anticipate", "Predict future steps for every observed prefix");
  c_ant->add_option("--checkpoint", an.checkpoint, "Model checkpoint")->required();
  c_ant->add_option("--corpus", an.corpus, "Recipe corpus (JSON lines)")->required()->check(CLI::ExistingFile);
  c_ant->add_option("--split", an.split, "train, val, test, heldout (val+test) or all")
      ->check(CLI::IsMember({"train", "val", "test", "heldout", "all"}));
  c_ant->add_option("--modality", an.modality, "text, video or video-text")
      ->check(CLI::IsMember({"text", "video", "video-text"}));
  c_ant->add_option("--strategy", an.strategy,
                    "gt, window:W or proposals:DIR (default gt; window:170 or the config width for video)");
  c_ant->add_option("--decode", an.decode, "greedy or beamK, e.g. beam5");
  c_ant->add_option("--horizons", an.horizons, "Future steps per prefix (default 4: next..next+3)");
  c_ant->add_option("--threads", an.threads, "Worker threads; 1 is bit-reproducible")->check(CLI::PositiveNumber);
  c_ant->add_option("--out", an.out, "Output directory")->required();
  c_ant->add_option("--config", an.config, "JSON config file")->check(CLI::ExistingFile);
  c_ant->add_flag("--quiet", an.quiet, "Suppress warnings on stderr");

  EvaluateArgs ev;
  auto* c_eval = app.add_subcommand("evaluate", "Score prediction traces against the ground-truth steps");
  c_eval->add_option("--traces", ev.traces, "traces.jsonl from anticipate")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--corpus", ev.corpus, "Recipe corpus (JSON lines)")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--ingredient-vocab", ev.ingredient_vocab, "ingredients.txt from build-vocab")
      ->required()
      ->check(CLI::ExistingFile);
  c_eval->add_option("--verb-lexicon", ev.verb_lexicon, "Verb lemma list (default: bundled lexicon)")
      ->check(CLI::ExistingFile);
  c_eval->add_option("--mode", ev.mode, "exact or future")->check(CLI::IsMember({"exact", "future"}));
  c_eval->add_option("--out", ev.out, "Output directory")->required();
  c_eval->add_flag("--quiet", ev.quiet, "Suppress warnings on stderr");

  SweepArgs sw;
  auto* c_sweep = app.add_subcommand("sweep-window", "Score fixed-window segmentation over a range of widths");
  c_sweep->add_option("--checkpoint", sw.checkpoint, "Model checkpoint")->required();
  c_sweep->add_option("--corpus", sw.corpus, "Recipe corpus (JSON lines)")->required()->check(CLI::ExistingFile);
  c_sweep->add_option("--widths", sw.widths, "start:stop:step (inclusive) or a comma list; default 30:230:20");
  c_sweep->add_option("--split", sw.split, "train, val, test, heldout or all")
      ->check(CLI::IsMember({"train", "val", "test", "heldout", "all"}));
  c_sweep->add_option("--decode", sw.decode, "greedy or beamK");
  c_sweep->add_option("--horizons", sw.horizons, "Future steps per prefix (default 4)");
  c_sweep->add_option("--threads", sw.threads, "Worker threads")->check(CLI::PositiveNumber);
  c_sweep->add_option("--verb-lexicon", sw.verb_lexicon, "Verb lemma list")->check(CLI::ExistingFile);
  c_sweep->add_option("--out", sw.out, "Output directory")->required();
  c_sweep->add_option("--config", sw.config, "JSON config file")->check(CLI::ExistingFile);
  c_sweep->add_flag("--quiet", sw.quiet, "Suppress progress and warnings");

  FixtureArgs fx;
  auto* c_fix = app.add_subcommand("make-fixtures", "Write the synthetic toy corpus");
  c_fix->group("");
  c_fix->add_option("--out", fx.out, "Output directory");
  c_fix->add_option("--seed", fx.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    cli::RunManifest manifest(name, args);
    if (*c_vocab) cmd_build_vocab(bv, manifest);
    if (*c_train) cmd_train(tr, manifest);
    if (*c_ant) cmd_anticipate(an, manifest);
    if (*c_eval) cmd_evaluate(ev, manifest);
    if (*c_sweep) cmd_sweep_window(sw, manifest);
    if (*c_fix) cmd_make_fixtures(fx, manifest);
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumerical);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kUsage);
  } catch (const json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kSuccess);
}
