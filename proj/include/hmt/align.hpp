#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <tuple>
#include <utility>
#include <vector>

#include "hmt/textprep.hpp"

namespace hmt {

// IBM Model 1 translation probabilities t(target | source). Source id 0 is
// the NULL word.
class LexicalTable {
 public:
  static constexpr std::string_view kNullWord = "NULL";
  static constexpr std::uint32_t kNull = 0;

  explicit LexicalTable(double epsilon = 1e-12);

  std::uint32_t add_source(std::string_view word);
  std::uint32_t add_target(std::string_view word);
  std::optional<std::uint32_t> source_id(std::string_view word) const;
  std::optional<std::uint32_t> target_id(std::string_view word) const;
  const std::string& source_word(std::uint32_t id) const { return src_words_.at(id); }
  const std::string& target_word(std::uint32_t id) const { return tgt_words_.at(id); }
  std::size_t source_size() const { return src_words_.size(); }
  std::size_t target_size() const { return tgt_words_.size(); }

  // Missing entries and unknown words read as epsilon.
  double prob(std::uint32_t src, std::uint32_t tgt) const;
  double prob(std::string_view src, std::string_view tgt) const;
  void set(std::uint32_t src, std::uint32_t tgt, double p);

  double epsilon() const { return epsilon_; }
  std::size_t size() const { return t_.size(); }

  // Sum of t(.|f) over the stored support, per source word.
  std::map<std::string, double> row_sums() const;

  // (source, target, probability) sorted by source then target string.
  std::vector<std::tuple<std::string, std::string, double>> entries() const;

 private:
  static std::uint64_t key(std::uint32_t src, std::uint32_t tgt) { return (std::uint64_t{src} << 32) | tgt; }

  friend class Ibm1Trainer;

  double epsilon_;
  std::vector<std::string> src_words_;
  std::vector<std::string> tgt_words_;
  std::unordered_map<std::string, std::uint32_t> src_ids_;
  std::unordered_map<std::string, std::uint32_t> tgt_ids_;
  std::unordered_map<std::uint64_t, double> t_;
};

struct AlignmentMatrix {
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  std::set<std::pair<std::size_t, std::size_t>> links;  // (source index, target index)

  bool contains(std::size_t i, std::size_t j) const { return links.count({i, j}) != 0; }
  bool operator==(const AlignmentMatrix&) const = default;
};

// Uniform start over co-occurring pairs, then `iterations` EM steps. When
// loglik_curve is given it receives corpus_loglik after every iteration.
// E-step shards are fixed-size and merged in order, so the result does not
// depend on the worker count.
LexicalTable ibm1_train(const ParallelCorpus& corpus, int iterations, double epsilon = 1e-12,
                        std::vector<double>* loglik_curve = nullptr, unsigned workers = 1);

// Natural-log Model 1 likelihood with the NULL word included.
double corpus_loglik(const LexicalTable& table, const ParallelCorpus& corpus);

// Links every target word to its best source word; NULL links are dropped
// and ties go to the smaller index (NULL counts as smallest).
AlignmentMatrix viterbi_align(const LexicalTable& table, const SentencePair& pair);

AlignmentMatrix transpose(const AlignmentMatrix& a);

// Symmetrizes two directional alignments given in source-target orientation.
AlignmentMatrix grow_diag_final(const AlignmentMatrix& forward, const AlignmentMatrix& reverse);

std::string format_alignment(const AlignmentMatrix& a);
AlignmentMatrix parse_alignment(std::string_view line, std::size_t src_len, std::size_t tgt_len,
                                std::size_t line_no = 1);

std::string write_lexical_table(const LexicalTable& table);
LexicalTable read_lexical_table(std::string_view text);

}  // namespace hmt
