#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include <unistd.h>

#include "hmt/align.hpp"
#include "hmt/error.hpp"
#include "hmt/pipeline.hpp"
#include "hmt/sgm.hpp"
#include "toy_corpus.hpp"

namespace fs = std::filesystem;
using namespace hmt;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("hmt-pipeline-test-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kMinimalConfig = R"({"paths": {"train_src": "a.src", "train_tgt": "a.tgt", "test_sgm": "t.sgm"}})";

ParallelCorpus numbered_corpus(std::size_t n) {
  ParallelCorpus c;
  for (std::size_t k = 0; k < n; ++k) c.push_back({{"s" + std::to_string(k)}, {"t" + std::to_string(k)}});
  return c;
}

}  // namespace

TEST(PipelineConfig, DefaultsAndRelativePaths) {
  const auto c = parse_config(kMinimalConfig, "/data/run");
  EXPECT_EQ(c.paths.train_src, fs::path("/data/run/a.src"));
  EXPECT_EQ(c.paths.test_sgm, fs::path("/data/run/t.sgm"));
  EXPECT_TRUE(c.paths.mono_tgt.empty());
  EXPECT_EQ(c.smt_train_count, 762022u);
  EXPECT_EQ(c.ape_train_count, 200000u);
  EXPECT_EQ(c.lm_order, 7);
  EXPECT_EQ(c.max_phrase_len, 7u);
}

TEST(PipelineConfig, SeedPropagatesToTraining) {
  const auto c = parse_config(
      R"({"paths": {"train_src": "a", "train_tgt": "b", "test_sgm": "c"}, "seed": 42, "train": {"d": 8}})");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.train.seed, 42u);
  EXPECT_EQ(c.train.d, 8);
}

TEST(PipelineConfig, RejectsUnknownKeysAndBadTypes) {
  EXPECT_THROW(parse_config(R"({"paths": {"train_src": "a", "train_tgt": "b", "test_sgm": "c"}, "lmorder": 3})"),
               ConfigError);
  EXPECT_THROW(
      parse_config(R"({"paths": {"train_src": "a", "train_tgt": "b", "test_sgm": "c"}, "decoder": {"stack": 3}})"),
      ConfigError);
  EXPECT_THROW(parse_config(R"({"paths": {"train_src": "a", "train_tgt": "b", "test_sgm": "c"}, "lm_order": "3"})"),
               ConfigError);
  EXPECT_THROW(parse_config(R"({"paths": {"train_src": "a", "train_tgt": "b", "test_sgm": "c"}, "lm_order": 0})"),
               ConfigError);
  EXPECT_THROW(
      parse_config(R"({"paths": {"train_src": "a", "train_tgt": "b", "test_sgm": "c"}, "smt_train_count": -1})"),
      ConfigError);
  EXPECT_THROW(parse_config(R"({"paths": {"train_src": "a", "test_sgm": "c"}})"), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(
      parse_config(R"({"paths": {"train_src": "a", "train_tgt": "b", "test_sgm": "c"}, "train": {"optimizer": "x"}})"),
      ConfigError);
}

TEST(PipelineConfig, JsonRoundTrip) {
  auto c = parse_config(kMinimalConfig, "/x");
  c.paths.output_dir = "/x/out";
  const auto again = parse_config(config_to_json(c).dump());
  EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(PipelineConfig, MissingFileIsConfigError) {
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(SplitCorpus, ContiguousSlices) {
  const auto corpus = numbered_corpus(10);
  const auto [smt, ape] = split_corpus(corpus, 7, 3);
  ASSERT_EQ(smt.size(), 7u);
  ASSERT_EQ(ape.size(), 3u);
  EXPECT_EQ(smt.front().source[0], "s0");
  EXPECT_EQ(ape.front().source[0], "s7");
  EXPECT_EQ(ape.back().source[0], "s9");
}

TEST(SplitCorpus, TooSmallIsConfigError) {
  try {
    split_corpus(numbered_corpus(10), 7, 4);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("10"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("11"), std::string::npos);
  }
}

TEST(SmtTranslate, IdentityTableCopiesInput) {
  PhraseTable table;
  for (const char* w : {"a", "b", "c", "d"}) table.add({w}, {{w}, {}});
  const auto lm = estimate_kn(count_ngrams({{"a", "b", "c", "d"}}, Vocab::build({{"a", "b", "c", "d"}}), 2));
  const std::vector<Sentence> input = {{"a", "b"}, {"c", "d", "a"}, {"d"}};
  DecoderConfig cfg;
  cfg.distortion_limit = 0;
  EXPECT_EQ(smt_translate(input, table, lm, cfg, 2), input);
  EXPECT_TRUE(smt_translate({}, table, lm, cfg).empty());
}

TEST(TrainApe, LengthMismatchIsPipelineError) {
  ape::TrainConfig cfg;
  EXPECT_THROW(train_ape({{"a"}, {"b"}}, {{"a"}}, cfg), PipelineError);
  EXPECT_THROW(train_ape({}, {}, cfg), PipelineError);
}

TEST(Pipeline, MissingArtifactNamesStage) {
  const auto dir = scratch("missing");
  auto setup = toy::write_copy_setup(dir, 20, 10, 1);
  Pipeline p(load_config(setup.config));
  try {
    p.train_lm();
    FAIL();
  } catch (const PipelineError& e) {
    EXPECT_NE(std::string(e.what()).find("train-lm"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("smt.tgt"), std::string::npos);
  }
  EXPECT_THROW(p.hybrid_translate(), PipelineError);
  fs::remove_all(dir);
}

TEST(Pipeline, NoOutputDirIsConfigError) {
  auto c = parse_config(kMinimalConfig);
  EXPECT_THROW(Pipeline{c}, ConfigError);
}

class ToyPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(scratch("toy"));
    setup_ = new toy::ToySetup(toy::write_copy_setup(*dir_, 120, 40, 3));
    pipeline_ = new Pipeline(load_config(setup_->config));
    pipeline_->train_smt();
  }
  static void TearDownTestSuite() {
    delete pipeline_;
    delete setup_;
    fs::remove_all(*dir_);
    delete dir_;
  }
  static fs::path out(const char* name) { return *dir_ / "out" / name; }

  static fs::path* dir_;
  static toy::ToySetup* setup_;
  static Pipeline* pipeline_;
};

fs::path* ToyPipeline::dir_ = nullptr;
toy::ToySetup* ToyPipeline::setup_ = nullptr;
Pipeline* ToyPipeline::pipeline_ = nullptr;

TEST_F(ToyPipeline, ArtifactsReloadToFixedPoints) {
  const auto arpa = read_file(out(artifact::kLm));
  EXPECT_EQ(write_arpa(read_arpa(arpa)), arpa);
  const auto table = read_file(out(artifact::kPhraseTable));
  EXPECT_EQ(write_table(read_table(table)), table);
  const auto lex = read_file(out(artifact::kLexF2E));
  EXPECT_EQ(write_lexical_table(read_lexical_table(lex)), lex);
  const auto tc = read_file(out(artifact::kTruecaseSrc));
  EXPECT_EQ(write_truecase_model(read_truecase_model(tc)), tc);
}

TEST_F(ToyPipeline, ReportRecordsTraining) {
  const auto& r = pipeline_->report();
  EXPECT_EQ(r["corpus"]["smt_pairs"], 120);
  EXPECT_EQ(r["corpus"]["ape_pairs"], 40);
  const auto fwd = r["em_loglik"]["forward"].get<std::vector<double>>();
  ASSERT_EQ(fwd.size(), 5u);
  for (std::size_t k = 1; k < fwd.size(); ++k) EXPECT_GE(fwd[k], fwd[k - 1] - 1e-9);
  EXPECT_GT(r["phrase_table"]["entries"].get<std::size_t>(), 0u);
  EXPECT_EQ(r["lm"]["order"], 3);
}

TEST_F(ToyPipeline, CopyLanguageIsTranslatedVerbatim) {
  std::mt19937 rng(99);
  const auto probe = toy::copy_sentences(30, rng);
  const auto output = parse_plain_corpus(pipeline_->smt_translate_text(toy::lines_text(probe)));
  ASSERT_EQ(output.size(), probe.size());
  std::size_t exact = 0;
  for (std::size_t k = 0; k < probe.size(); ++k) exact += output[k] == tokenize(probe[k]);
  EXPECT_GE(exact, 27u);
}

TEST_F(ToyPipeline, HybridKeepsSegmentIdsAndEmptySegments) {
  pipeline_->smt_translate();
  pipeline_->train_ape();
  pipeline_->hybrid_translate();
  const auto input = parse_sgm(read_file(setup_->test_sgm));
  const auto output = parse_sgm(read_file(out(artifact::kHybridSgm)));
  ASSERT_EQ(output.docs.size(), input.docs.size());
  for (std::size_t d = 0; d < input.docs.size(); ++d) {
    EXPECT_EQ(output.docs[d].doc_id, input.docs[d].doc_id);
    ASSERT_EQ(output.docs[d].segs.size(), input.docs[d].segs.size());
    for (std::size_t s = 0; s < input.docs[d].segs.size(); ++s) {
      EXPECT_EQ(output.docs[d].segs[s].id, input.docs[d].segs[s].id);
      if (input.docs[d].segs[s].text.empty()) EXPECT_TRUE(output.docs[d].segs[s].text.empty());
    }
  }
  EXPECT_EQ(output.kind, SgmDocument::Kind::Test);
  const auto scores = pipeline_->evaluate();
  EXPECT_GE(scores.bleu, 0.0);
  EXPECT_EQ(pipeline_->report()["scores"]["ter_excluded_empty_refs"], 1);
}

TEST_F(ToyPipeline, StagesListedOnce) {
  Pipeline again(load_config(setup_->config));
  again.stats();
  again.stats();
  const auto& stages = again.report()["stages"];
  std::size_t count = 0;
  for (const auto& s : stages) count += s == "stats";
  EXPECT_EQ(count, 1u);
  EXPECT_TRUE(again.report().contains("lm"));
}

TEST(HybridCopy, TrainingSegmentsComeBackVerbatim) {
  // Both stages copy: SMT on any copy-language input, APE on sentences it was trained on.
  const auto dir = scratch("copy");
  const auto setup = toy::write_copy_setup(dir, 120, 40, 150, 32, 1, true);
  Pipeline p(load_config(setup.config));
  p.run_all();
  const auto input = parse_sgm(read_file(setup.test_sgm));
  const auto output = parse_sgm(read_file(dir / "out" / artifact::kHybridSgm));
  ASSERT_EQ(output.docs.size(), input.docs.size());
  for (std::size_t d = 0; d < input.docs.size(); ++d) {
    ASSERT_EQ(output.docs[d].segs.size(), input.docs[d].segs.size());
    for (std::size_t s = 0; s < input.docs[d].segs.size(); ++s) {
      EXPECT_EQ(output.docs[d].segs[s].text, input.docs[d].segs[s].text) << "seg " << input.docs[d].segs[s].id;
    }
  }
  EXPECT_DOUBLE_EQ(p.evaluate().bleu, 100.0);
  fs::remove_all(dir);
}
