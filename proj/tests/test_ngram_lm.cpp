#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include "hmt/error.hpp"
#include "hmt/ngram_lm.hpp"
#include "oracles.hpp"

namespace hmt {
namespace {

NgramModel train(const std::vector<Sentence>& corpus, int order) {
  const auto vocab = Vocab::build(corpus);
  return estimate_kn(count_ngrams(corpus, vocab, order));
}

using namespace oracle;

TEST(Vocab, ReservedIds) {
  const auto v = Vocab::build({{"x", "y", "x"}});
  EXPECT_EQ(v.id("<s>"), Vocab::kBos);
  EXPECT_EQ(v.id("</s>"), Vocab::kEos);
  EXPECT_EQ(v.id("<unk>"), Vocab::kUnk);
  EXPECT_EQ(v.size(), 5u);
  EXPECT_EQ(v.id("never"), Vocab::kUnk);
  EXPECT_EQ(v.word(v.id("y")), "y");
}

TEST(CountNgrams, PadsWithBosAndEos) {
  const std::vector<Sentence> corpus = {{"a", "b"}};
  const auto v = Vocab::build(corpus);
  const auto c = count_ngrams(corpus, v, 2);
  const WordId a = v.id("a");
  const WordId b = v.id("b");
  const NgramCountMap bigrams = {{{Vocab::kBos, a}, 1}, {{a, b}, 1}, {{b, Vocab::kEos}, 1}};
  const NgramCountMap unigrams = {{{a}, 1}, {{b}, 1}, {{Vocab::kEos}, 1}};
  EXPECT_EQ(c.counts[1], bigrams);
  EXPECT_EQ(c.counts[0], unigrams);
}

TEST(CountNgrams, RepeatedWord) {
  const std::vector<Sentence> corpus = {{"a", "a", "a"}};
  const auto v = Vocab::build(corpus);
  const auto c = count_ngrams(corpus, v, 3);
  const WordId a = v.id("a");
  EXPECT_EQ(c.counts[2].at({a, a, a}), 1u);
  EXPECT_EQ(c.counts[1].at({a, a}), 2u);
}

TEST(CountNgrams, EmptyCorpusAndBadOrder) {
  const auto v = Vocab::build({});
  const auto c = count_ngrams({}, v, 3);
  for (const auto& m : c.counts) EXPECT_TRUE(m.empty());
  EXPECT_THROW(count_ngrams({}, v, 0), ParameterError);
}

// Modified Kneser-Ney worked by hand on three sentences.
TEST(EstimateKn, MatchesHandOracle) {
  const auto m = train({{"a", "b"}, {"a", "b"}, {"a", "c"}}, 2);
  const auto& v = m.vocab();
  // Unigram continuation counts a=1 b=1 c=1 </s>=2 have n3 = 0, so the fixed
  // discount 0.75 applies; 4 types share total 5 over 5 predictable words.
  const double gamma0 = 0.75 * 4 / 5;
  const double p_a = (1 - 0.75) / 5 + gamma0 / 5;
  const double p_eos = (2 - 0.75) / 5 + gamma0 / 5;
  const double p_unk = gamma0 / 5;
  EXPECT_NEAR(p_a, 0.17, 1e-12);
  EXPECT_NEAR(std::pow(10.0, m.logprob({}, v.id("a"))), p_a, 1e-9);
  EXPECT_NEAR(std::pow(10.0, m.logprob({}, Vocab::kEos)), p_eos, 1e-9);
  EXPECT_NEAR(std::pow(10.0, m.logprob({}, Vocab::kUnk)), p_unk, 1e-9);
  ASSERT_EQ(m.fallback_orders, std::vector<int>{1});

  // Bigram counts 3,2,1,2,1: n1=2 n2=2 n3=1 n4=0.
  const double y = 2.0 / (2.0 + 2 * 2.0);
  const double d1 = 1 - 2 * y * 2.0 / 2.0;
  const double d2 = 2 - 3 * y * 1.0 / 2.0;
  const WordId ctx[] = {v.id("a")};
  const double gamma_a = (d1 + d2) / 3.0;
  EXPECT_NEAR(std::pow(10.0, m.logprob(ctx, v.id("b"))), (2 - d2) / 3.0 + gamma_a * p_a, 1e-9);
  EXPECT_NEAR(std::pow(10.0, m.logprob(ctx, v.id("c"))), (1 - d1) / 3.0 + gamma_a * p_a, 1e-9);
  EXPECT_NEAR(std::pow(10.0, m.logprob(ctx, v.id("b"))), 0.2705555555555556, 1e-9);
  EXPECT_NEAR(std::pow(10.0, m.logprob(ctx, v.id("c"))), 0.3261111111111111, 1e-9);
}

TEST(EstimateKn, NormalizesOverEveryStoredContext) {
  std::mt19937 rng(21);
  const auto m = train(random_text(rng, 50, 8, 7), 3);
  for (int n = 1; n < m.order(); ++n) {
    m.for_each(n, [&](std::span<const WordId> ngram, const NgramEntry&) {
      const std::vector<WordId> context(ngram.begin(), ngram.end());
      EXPECT_NEAR(sum_over_vocab(m, context), 1.0, 1e-6);
    });
  }
  EXPECT_NEAR(sum_over_vocab(m, {}), 1.0, 1e-6);
}

TEST(EstimateKn, StoredLogProbsAreNonPositive) {
  std::mt19937 rng(4);
  const auto m = train(random_text(rng, 30, 6, 6), 4);
  for (int n = 1; n <= m.order(); ++n) {
    m.for_each(n, [&](std::span<const WordId>, const NgramEntry& e) { EXPECT_LE(e.log10_prob, 0.0); });
  }
}

TEST(EstimateKn, UnknownWordHasMass) {
  const auto m = train({{"a", "b"}, {"b", "c"}}, 3);
  const WordId ctx[] = {m.vocab().id("a"), m.vocab().id("b")};
  EXPECT_GT(m.logprob(ctx, Vocab::kUnk), -20.0);
}

// Independent backoff walk over the stored entries.
double oracle_logprob(const std::map<std::vector<WordId>, NgramEntry>& entries, std::vector<WordId> context,
                      WordId w) {
  std::vector<WordId> full = context;
  full.push_back(w);
  if (auto it = entries.find(full); it != entries.end()) return it->second.log10_prob;
  if (context.empty()) return oracle_logprob(entries, {}, Vocab::kUnk);
  double backoff = 0.0;
  if (auto it = entries.find(context); it != entries.end()) backoff = it->second.log10_backoff;
  context.erase(context.begin());
  return backoff + oracle_logprob(entries, context, w);
}

TEST(Logprob, AgreesWithRecursiveOracleExhaustively) {
  std::mt19937 rng(8);
  const auto m = train(random_text(rng, 25, 6, 6), 3);
  std::map<std::vector<WordId>, NgramEntry> entries;
  for (int n = 1; n <= 3; ++n) {
    m.for_each(n, [&](std::span<const WordId> g, const NgramEntry& e) { entries[{g.begin(), g.end()}] = e; });
  }
  const auto V = static_cast<WordId>(m.vocab().size());
  ASSERT_LE(V, 10u);
  for (WordId w = 1; w < V; ++w) {
    EXPECT_DOUBLE_EQ(m.logprob({}, w), oracle_logprob(entries, {}, w));
    for (WordId c1 = 0; c1 < V; ++c1) {
      const WordId one[] = {c1};
      EXPECT_NEAR(m.logprob(one, w), oracle_logprob(entries, {c1}, w), 1e-12);
      for (WordId c2 = 0; c2 < V; ++c2) {
        const WordId two[] = {c1, c2};
        EXPECT_NEAR(m.logprob(two, w), oracle_logprob(entries, {c1, c2}, w), 1e-12);
      }
    }
  }
}

TEST(Logprob, RejectsLongContext) {
  const auto m = train({{"a"}}, 2);
  const WordId ctx[] = {0, 0};
  EXPECT_THROW(m.logprob(ctx, 1), ParameterError);
}

TEST(SentenceLogprob, SumsPaddedPositions) {
  const auto m = train({{"a", "b"}, {"a"}}, 2);
  const auto& v = m.vocab();
  const WordId bos[] = {Vocab::kBos};
  const WordId a[] = {v.id("a")};
  EXPECT_NEAR(sentence_logprob(m, {}), m.logprob(bos, Vocab::kEos), 1e-12);
  EXPECT_NEAR(sentence_logprob(m, {"a"}), m.logprob(bos, v.id("a")) + m.logprob(a, Vocab::kEos), 1e-12);
  EXPECT_LE(sentence_logprob(m, {"z", "a", "b"}), 0.0);
}

TEST(Perplexity, DegenerateCorpusMatchesOracle) {
  const std::vector<Sentence> corpus = {{"a"}, {"a"}};
  const auto m = train(corpus, 2);
  const double total = 2 * sentence_logprob(m, {"a"});
  EXPECT_NEAR(perplexity(m, corpus), std::pow(10.0, -total / 4.0), 1e-9);
  EXPECT_GE(perplexity(m, corpus), 1.0);
  EXPECT_THROW(perplexity(m, {}), ParameterError);
}

TEST(Perplexity, UniformUnigramIsVocabularySize) {
  Vocab v;
  std::vector<NgramModel::OrderEntries> entries(1);
  const int words = 8;
  for (int k = 0; k < words; ++k) v.add("w" + std::to_string(k));
  // uniform over the 8 words, </s> and <unk>
  const double lp = -std::log10(static_cast<double>(words + 2));
  for (WordId id = 1; id < v.size(); ++id) entries[0].push_back({{id}, {lp, 0.0}});
  const NgramModel m(v, entries);
  std::mt19937 rng(1);
  const auto text = random_text(rng, 40, words, 9);
  EXPECT_NEAR(perplexity(m, text), words + 2, 1e-9);
}

TEST(Perplexity, HigherOrderNeverFitsTrainingWorse) {
  std::mt19937 rng(99);
  for (int trial = 0; trial < 5; ++trial) {
    const auto corpus = random_text(rng, 20 + trial * 5, 5, 8);
    EXPECT_GE(perplexity(train(corpus, 2), corpus) + 1e-9, perplexity(train(corpus, 3), corpus)) << trial;
  }
}

TEST(Arpa, RoundTrip) {
  std::mt19937 rng(2);
  const auto m = train(random_text(rng, 30, 7, 6), 3);
  const auto back = read_arpa(write_arpa(m));
  ASSERT_EQ(back.order(), m.order());
  for (int n = 1; n <= m.order(); ++n) {
    ASSERT_EQ(back.size(n), m.size(n));
    m.for_each(n, [&](std::span<const WordId> g, const NgramEntry& e) {
      std::vector<WordId> mapped;
      for (auto id : g) mapped.push_back(back.vocab().id(m.vocab().word(id)));
      const auto other = back.find(mapped);
      ASSERT_TRUE(other.has_value());
      EXPECT_NEAR(other->log10_prob, e.log10_prob, 1e-6);
      EXPECT_NEAR(other->log10_backoff, e.log10_backoff, 1e-6);
    });
  }
  EXPECT_EQ(write_arpa(back), write_arpa(m));
}

TEST(Arpa, ReadsHandWrittenFile) {
  const auto m = read_arpa("\\data\\\nngram 1=2\n\n\\1-grams:\n-0.3\ta\n-0.5\t</s>\n\n\\end\\\n");
  EXPECT_EQ(m.order(), 1);
  EXPECT_EQ(m.size(1), 2u);
  const WordId a[] = {m.vocab().id("a")};
  EXPECT_DOUBLE_EQ(m.find(a)->log10_prob, -0.3);
}

TEST(Arpa, Errors) {
  EXPECT_THROW(read_arpa("ngram 1=1\n\\1-grams:\n-1\ta\n\\end\\\n"), ParseError);
  try {
    read_arpa("\\data\\\nngram 1=2\nngram 2=3\n\n\\1-grams:\n-0.3\ta\n-0.3\tb\n\n\\2-grams:\n-0.1\ta b\n-0.1\tb a\n\n"
              "\\end\\\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.line(), 1u);
  }
  EXPECT_THROW(read_arpa("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.3\ta\n"), ParseError);
}

}  // namespace
}  // namespace hmt
