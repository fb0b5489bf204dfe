#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "hmt/ngram_lm.hpp"
#include "hmt/phrases.hpp"
#include "hmt/textprep.hpp"

namespace hmt {

// Log-linear feature weights. Phrase features and the LM are scored in log10.
struct DecoderWeights {
  double phi_tgt_given_src = 0.2;
  double phi_src_given_tgt = 0.2;
  double lex_tgt_given_src = 0.1;
  double lex_src_given_tgt = 0.1;
  double lm = 0.5;
  double distortion = 0.3;
  double word_penalty = -0.1;
};

// None of these values come from tuning; they are fixed defaults.
struct DecoderConfig {
  std::size_t stack_size = 100;
  double beam_threshold = 5.0;  // log-score margin below each stack's best
  int distortion_limit = 6;     // -1 = unlimited
  DecoderWeights weights;
};

// Per-feature probability given to a copied-through unknown word.
inline constexpr double kOovFeatureFloor = 1e-7;

struct TranslationSegment {
  std::size_t src_begin = 0;
  std::size_t src_end = 0;
  Sentence target;
};

struct Translation {
  Sentence tokens;
  double model_score = 0.0;
  std::vector<TranslationSegment> segmentation;  // in translation order
};

struct StackTrace {
  std::size_t cardinality = 0;
  std::size_t size_after_pruning = 0;
  double best_score = 0.0;
};

// Best achievable score per source span [begin, end), -infinity when no
// sequence of options covers it.
class FutureCostTable {
 public:
  static constexpr double kUncoverable = -std::numeric_limits<double>::infinity();

  explicit FutureCostTable(std::size_t n = 0) : n_(n), cost_(n * (n + 1), kUncoverable) {}

  double at(std::size_t begin, std::size_t end) const { return cost_[begin * (n_ + 1) + end]; }
  double& at(std::size_t begin, std::size_t end) { return cost_[begin * (n_ + 1) + end]; }
  std::size_t length() const { return n_; }

 private:
  std::size_t n_;
  std::vector<double> cost_;
};

// Translation options of one source span, including the copy-through option
// for words that have no single-word entry.
struct SpanOption {
  std::size_t src_begin = 0;
  std::size_t src_end = 0;
  Sentence target;
  PhraseScores scores;
  bool copied = false;
};

std::vector<SpanOption> collect_options(const Sentence& sentence, const PhraseTable& table);

// Weighted phrase features plus word penalty; LM and distortion excluded.
double option_score(const PhraseScores& scores, std::size_t target_length, const DecoderConfig& config);

FutureCostTable future_cost(const Sentence& sentence, const PhraseTable& table, const NgramModel& lm,
                            const DecoderConfig& config);

// Scores a complete derivation from scratch. Throws ParameterError when the
// segments do not partition the source or use a phrase the table lacks.
double score_hypothesis(const Sentence& source, const std::vector<TranslationSegment>& segmentation,
                        const PhraseTable& table, const NgramModel& lm, const DecoderConfig& config);

Translation decode(const Sentence& sentence, const PhraseTable& table, const NgramModel& lm,
                   const DecoderConfig& config, std::vector<StackTrace>* trace = nullptr);

}  // namespace hmt
