#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "hmt/textprep.hpp"

namespace hmt {

struct EvalPair {
  Sentence hypothesis;
  Sentence reference;
};

std::vector<EvalPair> make_eval_pairs(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references);

// Corpus BLEU in [0, 100], no smoothing. Uncased mode lowercases both sides.
double bleu(const std::vector<EvalPair>& pairs, std::size_t max_n = 4, bool cased = true);

// Levenshtein distance with unit costs.
template <typename Seq>
std::size_t edit_distance(const Seq& a, const Seq& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

struct TerOptions {
  bool shifts = true;
  std::size_t max_shift_length = 10;
};

struct TerResult {
  double score = 0.0;
  std::size_t edits = 0;
  std::size_t reference_words = 0;
  std::size_t excluded = 0;  // pairs skipped for an empty reference
};

// Edits for one pair: block shifts plus word edit distance after shifting.
std::size_t ter_edits(const Sentence& hypothesis, const Sentence& reference, const TerOptions& options = {});

TerResult ter_detail(const std::vector<EvalPair>& pairs, const TerOptions& options = {});
double ter(const std::vector<EvalPair>& pairs, const TerOptions& options = {});

struct CharacterResult {
  double score = 0.0;
  std::size_t empty_hypotheses = 0;  // scored 1.0 each
};

CharacterResult character_detail(const std::vector<EvalPair>& pairs);
double character(const std::vector<EvalPair>& pairs);

struct MetricScores {
  double bleu = 0.0;
  double bleu_cased = 0.0;
  double ter = 0.0;
  double character = 0.0;
};

MetricScores score_all(const std::vector<EvalPair>& pairs);

// "metric<TAB>score" lines with four decimals.
std::string format_scores(const MetricScores& scores);

}  // namespace hmt
