#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hmt {

// A sentence is an ordered list of whitespace-free tokens.
using Sentence = std::vector<std::string>;

struct SentencePair {
  Sentence source;
  Sentence target;

  bool operator==(const SentencePair&) const = default;
};

using ParallelCorpus = std::vector<SentencePair>;

// Splits text into maximal letter/digit runs and single punctuation
// characters. Throws EncodingError on invalid UTF-8.
Sentence tokenize(std::string_view text);

// Inverse of reading a plain-corpus line: tokens joined by single spaces.
std::string join_tokens(const Sentence& sentence);

// Unicode-aware case helpers (full code point mapping, UTF-8 in and out).
std::string to_lower(std::string_view text);
std::string to_upper_first(std::string_view text);
bool is_acronym(std::string_view token);
bool starts_with_letter(std::string_view token);

struct TruecaseModel {
  // lowercased token -> most frequent observed surface form
  std::map<std::string, std::string> best_form;
  // surface form -> occurrences outside sentence-initial position
  std::map<std::string, std::size_t> counts;

  bool empty() const { return best_form.empty(); }
};

TruecaseModel train_truecaser(const std::vector<Sentence>& corpus);
Sentence truecase(const Sentence& sentence, const TruecaseModel& model);
Sentence detruecase(const Sentence& sentence);

std::string write_truecase_model(const TruecaseModel& model);
TruecaseModel read_truecase_model(std::string_view text);

// Keeps pairs whose two sides both have 1..max_len tokens, order preserved.
ParallelCorpus clean_corpus(const ParallelCorpus& corpus, std::size_t max_len = 80);

struct CorpusStats {
  std::size_t source_sentences = 0;
  std::size_t target_sentences = 0;
  std::size_t source_tokens = 0;
  std::size_t target_tokens = 0;
  std::size_t source_vocab = 0;
  std::size_t target_vocab = 0;

  bool operator==(const CorpusStats&) const = default;
};

CorpusStats corpus_stats(const ParallelCorpus& corpus);

// Plain-corpus format: one sentence per line, tokens separated by spaces.
std::vector<Sentence> parse_plain_corpus(std::string_view text);
std::string write_plain_corpus(const std::vector<Sentence>& sentences);

ParallelCorpus zip_corpus(std::vector<Sentence> source, std::vector<Sentence> target);

}  // namespace hmt
