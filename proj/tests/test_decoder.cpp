#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hmt/decoder.hpp"
#include "hmt/error.hpp"
#include "oracles.hpp"

namespace hmt {
namespace {

using namespace oracle;

TEST(Decode, EmptySentence) {
  PhraseTable table;
  const auto lm = train_lm({{"a"}}, 2);
  const auto t = decode({}, table, lm, DecoderConfig{});
  EXPECT_TRUE(t.tokens.empty());
  EXPECT_EQ(t.model_score, 0.0);
}

TEST(Decode, SinglePath) {
  PhraseTable table;
  table.add({"a", "b"}, {{"x", "y", "z"}, {0.5, 0.5, 0.5, 0.5}});
  table.add({"a"}, {{"x"}, {1e-3, 1e-3, 1e-3, 1e-3}});
  table.add({"b"}, {{"q"}, {1e-3, 1e-3, 1e-3, 1e-3}});
  const auto lm = train_lm({{"x", "y", "z"}}, 3);
  const auto t = decode({"a", "b"}, table, lm, DecoderConfig{});
  EXPECT_EQ(t.tokens, (Sentence{"x", "y", "z"}));
  ASSERT_EQ(t.segmentation.size(), 1u);
}

TEST(Decode, OovPassThrough) {
  PhraseTable table;
  const auto lm = train_lm({{"a", "b"}}, 2);
  const Sentence s = {"Vilnius", "mieste"};
  const auto t = decode(s, table, lm, DecoderConfig{});
  EXPECT_EQ(t.tokens, s);
  const DecoderConfig c;
  const double floor = std::log10(kOovFeatureFloor);
  const auto& w = c.weights;
  const double expected =
      2 * ((w.phi_tgt_given_src + w.phi_src_given_tgt + w.lex_tgt_given_src + w.lex_src_given_tgt) * floor +
           w.word_penalty) +
      w.lm * sentence_logprob(lm, s);
  EXPECT_NEAR(t.model_score, expected, 1e-9);
}

TEST(Decode, MatchesExhaustiveOracle) {
  std::mt19937 rng(53);
  for (int trial = 0; trial < 60; ++trial) {
    const auto toy = random_toy(rng);
    Sentence sentence;
    const std::size_t len = 1 + rng() % 5;
    for (std::size_t k = 0; k < len; ++k) sentence.push_back("s" + std::to_string(rng() % 5));  // s4 is OOV
    const auto config = unbounded();
    const auto result = decode(sentence, toy.table, toy.lm, config);

    const auto options = oracle_options(sentence, toy.table);
    std::vector<bool> covered(sentence.size(), false);
    std::vector<const Option*> order;
    double best = -std::numeric_limits<double>::infinity();
    exhaustive(options, covered, sentence.size(), order, toy.lm, config.weights, best);
    EXPECT_NEAR(result.model_score, best, 1e-9) << "trial " << trial;
    EXPECT_NEAR(score_hypothesis(sentence, result.segmentation, toy.table, toy.lm, config), result.model_score, 1e-9);

    // pruned runs never beat the exhaustive optimum
    DecoderConfig pruned;
    pruned.stack_size = 2;
    pruned.beam_threshold = 1.0;
    pruned.distortion_limit = 1;
    const auto small = decode(sentence, toy.table, toy.lm, pruned);
    EXPECT_LE(small.model_score, best + 1e-9);
    EXPECT_NEAR(score_hypothesis(sentence, small.segmentation, toy.table, toy.lm, pruned), small.model_score, 1e-9);

    std::vector<bool> full(sentence.size(), false);
    for (const auto& seg : result.segmentation) {
      for (std::size_t i = seg.src_begin; i < seg.src_end; ++i) full[i] = true;
    }
    EXPECT_EQ(std::count(full.begin(), full.end(), false), 0);
  }
}

TEST(Decode, TraceHasOneLinePerStack) {
  std::mt19937 rng(59);
  const auto toy = random_toy(rng);
  std::vector<StackTrace> trace;
  const Sentence s = {"s0", "s1", "s2"};
  const auto t = decode(s, toy.table, toy.lm, DecoderConfig{}, &trace);
  ASSERT_EQ(trace.size(), s.size() + 1);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    EXPECT_EQ(trace[k].cardinality, k);
    EXPECT_GE(trace[k].size_after_pruning, 1u);
    EXPECT_LE(trace[k].size_after_pruning, DecoderConfig{}.stack_size);
  }
  EXPECT_FALSE(t.tokens.empty());
}

TEST(ScoreHypothesis, LmOnly) {
  PhraseTable table;
  table.add({"a"}, {{"x", "y"}, {0.3, 0.4, 0.5, 0.6}});
  const auto lm = train_lm({{"x", "y"}, {"y"}}, 2);
  DecoderConfig c;
  c.weights = {0, 0, 0, 0, 1, 0, 0};
  EXPECT_NEAR(score_hypothesis({"a"}, {{0, 1, {"x", "y"}}}, table, lm, c), sentence_logprob(lm, {"x", "y"}), 1e-12);
}

TEST(ScoreHypothesis, Distortion) {
  PhraseTable table;
  table.add({"a"}, {{"x"}, {1, 1, 1, 1}});
  table.add({"b"}, {{"y"}, {1, 1, 1, 1}});
  const auto lm = train_lm({{"x", "y"}}, 2);
  DecoderConfig c;
  c.weights = {0, 0, 0, 0, 0, 1, 0};
  EXPECT_DOUBLE_EQ(score_hypothesis({"a", "b"}, {{0, 1, {"x"}}, {1, 2, {"y"}}}, table, lm, c), 0.0);
  // b first jumps 1 from the start, then a jumps back 2 from the end of b
  EXPECT_DOUBLE_EQ(score_hypothesis({"a", "b"}, {{1, 2, {"y"}}, {0, 1, {"x"}}}, table, lm, c), -3.0);
}

TEST(ScoreHypothesis, RejectsNonPartition) {
  PhraseTable table;
  table.add({"a"}, {{"x"}, {1, 1, 1, 1}});
  const auto lm = train_lm({{"x"}}, 2);
  const DecoderConfig c;
  EXPECT_THROW(score_hypothesis({"a", "a"}, {{0, 1, {"x"}}}, table, lm, c), ParameterError);
  EXPECT_THROW(score_hypothesis({"a"}, {{0, 1, {"x"}}, {0, 1, {"x"}}}, table, lm, c), ParameterError);
  EXPECT_THROW(score_hypothesis({"a"}, {{0, 1, {"zz"}}}, table, lm, c), ParameterError);
}

TEST(FutureCost, BaseCaseAndSplits) {
  std::mt19937 rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const auto toy = random_toy(rng);
    Sentence s;
    const std::size_t n = 1 + rng() % 5;
    for (std::size_t k = 0; k < n; ++k) s.push_back("s" + std::to_string(rng() % 5));
    DecoderConfig c;
    c.weights.lm = 0.0;
    const auto fc = future_cost(s, toy.table, toy.lm, c);
    std::vector<std::vector<double>> single(n, std::vector<double>(n + 1, FutureCostTable::kUncoverable));
    for (const auto& o : oracle_options(s, toy.table)) {
      single[o.begin][o.end] = std::max(single[o.begin][o.end], option_score(o.scores, o.target.size(), c));
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = i + 1; k <= n; ++k) {
        // enumerate every split of [i, k) via a bit mask over the inner cut points
        double best = FutureCostTable::kUncoverable;
        const std::size_t cuts = k - i - 1;
        for (std::size_t mask = 0; mask < (std::size_t{1} << cuts); ++mask) {
          double total = 0.0;
          std::size_t start = i;
          for (std::size_t c2 = 0; c2 <= cuts; ++c2) {
            if (c2 == cuts || (mask >> c2 & 1)) {
              total += single[start][i + c2 + 1];
              start = i + c2 + 1;
            }
          }
          best = std::max(best, total);
        }
        EXPECT_NEAR(fc.at(i, k), best, 1e-9);
      }
    }
  }
}

TEST(FutureCost, EmptyTableIsUncoverable) {
  const FutureCostTable fc(3);
  EXPECT_EQ(fc.at(0, 3), FutureCostTable::kUncoverable);
}

}  // namespace
}  // namespace hmt
