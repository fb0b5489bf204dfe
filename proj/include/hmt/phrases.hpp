#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "hmt/align.hpp"
#include "hmt/textprep.hpp"

namespace hmt {

// Half-open source and target spans of an extracted phrase pair.
struct PhraseSpan {
  std::size_t src_begin = 0;
  std::size_t src_end = 0;
  std::size_t tgt_begin = 0;
  std::size_t tgt_end = 0;

  auto operator<=>(const PhraseSpan&) const = default;
};

struct PhrasePair {
  Sentence source;
  Sentence target;
  PhraseSpan span;
};

// Every box that contains at least one link and that no link leaves, with
// both sides at most max_phrase_len long. Unaligned boundary words are
// absorbed into wider boxes.
std::vector<PhrasePair> extract_consistent(const SentencePair& pair, const AlignmentMatrix& alignment,
                                           std::size_t max_phrase_len = 7);

struct PhraseScores {
  double phi_tgt_given_src = 1.0;
  double phi_src_given_tgt = 1.0;
  double lex_tgt_given_src = 1.0;
  double lex_src_given_tgt = 1.0;
};

struct PhraseOption {
  Sentence target;
  PhraseScores scores;
};

class PhraseTable {
 public:
  // Options are kept sorted by descending phi_tgt_given_src, then target.
  void add(const Sentence& source, PhraseOption option);

  const std::vector<PhraseOption>& lookup(const Sentence& source) const;
  const std::vector<PhraseOption>& lookup(std::string_view joined_source) const;

  std::size_t source_phrases() const { return entries_.size(); }
  std::size_t size() const;
  std::size_t max_source_length() const { return max_source_length_; }

  const std::map<std::string, std::vector<PhraseOption>, std::less<>>& entries() const { return entries_; }

 private:
  std::map<std::string, std::vector<PhraseOption>, std::less<>> entries_;
  std::size_t max_source_length_ = 0;
};

// Alignment-based lexical weight of one phrase pair: product over `target`
// words of the mean t(target | linked source words), NULL when unlinked.
// links are relative to the phrase.
double lexical_weight(const Sentence& source, const Sentence& target,
                      const std::set<std::pair<std::size_t, std::size_t>>& links, const LexicalTable& table);

PhraseTable build_table(const ParallelCorpus& corpus, const std::vector<AlignmentMatrix>& alignments,
                        const LexicalTable& forward, const LexicalTable& reverse, std::size_t max_phrase_len = 7);

std::string write_table(const PhraseTable& table);
PhraseTable read_table(std::string_view text);

}  // namespace hmt
