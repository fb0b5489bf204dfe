#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmt/textprep.hpp"

namespace hmt {

using WordId = std::uint32_t;

// String <-> id bijection with fixed ids for the sentence markers and the
// unknown word.
class Vocab {
 public:
  static constexpr WordId kBos = 0;
  static constexpr WordId kEos = 1;
  static constexpr WordId kUnk = 2;
  static constexpr std::string_view kBosWord = "<s>";
  static constexpr std::string_view kEosWord = "</s>";
  static constexpr std::string_view kUnkWord = "<unk>";

  Vocab();

  static Vocab build(const std::vector<Sentence>& corpus);

  WordId add(std::string_view word);
  std::optional<WordId> find(std::string_view word) const;
  // Maps out-of-vocabulary words to kUnk.
  WordId id(std::string_view word) const;
  const std::string& word(WordId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }

  std::vector<WordId> map(const Sentence& sentence) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> ids_;
};

struct NgramKeyHash {
  std::size_t operator()(const std::vector<WordId>& key) const noexcept;
};

using NgramCountMap = std::unordered_map<std::vector<WordId>, std::uint64_t, NgramKeyHash>;

struct NgramCounts {
  int order = 7;
  // counts[n - 1] holds the n-grams, oldest word first.
  std::vector<NgramCountMap> counts;
  Vocab vocab;
};

// Pads every sentence with order-1 <s> and one </s>, then counts every
// n-gram (n = 1..order) that ends on a predicted token.
NgramCounts count_ngrams(const std::vector<Sentence>& corpus, const Vocab& vocab, int order);

struct NgramEntry {
  double log10_prob = 0.0;
  double log10_backoff = 0.0;
};

// Immutable backoff language model. Each order is a sorted array keyed by the
// reversed n-gram (predicted word first), searched by bisection.
class NgramModel {
 public:
  // Probability used for n-grams that can never be predicted (<s> contexts).
  static constexpr double kImpossible = -99.0;

  using OrderEntries = std::vector<std::pair<std::vector<WordId>, NgramEntry>>;

  NgramModel() = default;
  // entries[n - 1] holds the n-grams in forward order; any order is accepted.
  NgramModel(Vocab vocab, std::vector<OrderEntries> entries);

  int order() const { return static_cast<int>(tables_.size()); }
  const Vocab& vocab() const { return vocab_; }
  std::size_t size(int n) const { return tables_.at(static_cast<std::size_t>(n - 1)).probs.size(); }

  std::optional<NgramEntry> find(std::span<const WordId> ngram) const;

  // log10 P(word | context), context oldest first with at most order-1 ids.
  double logprob(std::span<const WordId> context, WordId word) const;

  // Visits the n-grams of one order sorted by their forward id sequence.
  void for_each(int n, const std::function<void(std::span<const WordId>, const NgramEntry&)>& fn) const;

  // Orders where count-of-counts were degenerate and the fixed 0.75 discount
  // was used instead of the modified Kneser-Ney estimates.
  std::vector<int> fallback_orders;

 private:
  struct Table {
    int n = 0;
    std::vector<WordId> keys;  // reversed n-grams, n ids each
    std::vector<double> probs;
    std::vector<double> backoffs;
  };

  std::optional<std::size_t> locate(const Table& table, std::span<const WordId> ngram) const;

  Vocab vocab_;
  std::vector<Table> tables_;
};

// Modified Kneser-Ney estimate, stored in backoff form.
NgramModel estimate_kn(const NgramCounts& counts);

double sentence_logprob(const NgramModel& model, const Sentence& sentence);
double perplexity(const NgramModel& model, const std::vector<Sentence>& corpus);

std::string write_arpa(const NgramModel& model);
NgramModel read_arpa(std::string_view text);

}  // namespace hmt
