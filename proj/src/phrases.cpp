#include "hmt/phrases.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <unordered_map>

#include "hmt/error.hpp"

namespace hmt {

namespace {

Sentence slice(const Sentence& s, std::size_t begin, std::size_t end) {
  return Sentence(s.begin() + static_cast<std::ptrdiff_t>(begin), s.begin() + static_cast<std::ptrdiff_t>(end));
}

bool option_before(const PhraseOption& a, const PhraseOption& b) {
  if (a.scores.phi_tgt_given_src != b.scores.phi_tgt_given_src) {
    return a.scores.phi_tgt_given_src > b.scores.phi_tgt_given_src;
  }
  return join_tokens(a.target) < join_tokens(b.target);
}

}  // namespace

std::vector<PhrasePair> extract_consistent(const SentencePair& pair, const AlignmentMatrix& alignment,
                                           std::size_t max_phrase_len) {
  const auto n = static_cast<std::ptrdiff_t>(pair.source.size());
  const auto m = static_cast<std::ptrdiff_t>(pair.target.size());
  const auto limit = static_cast<std::ptrdiff_t>(max_phrase_len);
  if (alignment.src_len != pair.source.size() || alignment.tgt_len != pair.target.size()) {
    throw ParameterError("extract_consistent: alignment dimensions do not match the sentence pair");
  }
  std::vector<bool> tgt_aligned(static_cast<std::size_t>(m), false);
  for (const auto& [i, j] : alignment.links) tgt_aligned[j] = true;

  std::vector<PhrasePair> out;
  for (std::ptrdiff_t s1 = 0; s1 < n; ++s1) {
    for (std::ptrdiff_t s2 = s1; s2 < std::min(n, s1 + limit); ++s2) {
      std::ptrdiff_t t1 = m;
      std::ptrdiff_t t2 = -1;
      for (const auto& [i, j] : alignment.links) {
        const auto si = static_cast<std::ptrdiff_t>(i);
        const auto tj = static_cast<std::ptrdiff_t>(j);
        if (si >= s1 && si <= s2) {
          t1 = std::min(t1, tj);
          t2 = std::max(t2, tj);
        }
      }
      if (t2 < 0 || t2 - t1 + 1 > limit) continue;
      bool consistent = true;
      for (const auto& [i, j] : alignment.links) {
        const auto si = static_cast<std::ptrdiff_t>(i);
        const auto tj = static_cast<std::ptrdiff_t>(j);
        if (tj >= t1 && tj <= t2 && (si < s1 || si > s2)) {
          consistent = false;
          break;
        }
      }
      if (!consistent) continue;

      // Widen the target side over unaligned neighbours.
      for (std::ptrdiff_t ts = t1; ts >= 0 && (ts == t1 || !tgt_aligned[static_cast<std::size_t>(ts)]); --ts) {
        if (t2 - ts + 1 > limit) break;
        for (std::ptrdiff_t te = t2; te < m && (te == t2 || !tgt_aligned[static_cast<std::size_t>(te)]); ++te) {
          if (te - ts + 1 > limit) break;
          PhraseSpan span{static_cast<std::size_t>(s1), static_cast<std::size_t>(s2 + 1), static_cast<std::size_t>(ts),
                          static_cast<std::size_t>(te + 1)};
          out.push_back({slice(pair.source, span.src_begin, span.src_end),
                         slice(pair.target, span.tgt_begin, span.tgt_end), span});
        }
      }
    }
  }
  return out;
}

void PhraseTable::add(const Sentence& source, PhraseOption option) {
  auto& list = entries_[join_tokens(source)];
  list.insert(std::upper_bound(list.begin(), list.end(), option, option_before), std::move(option));
  max_source_length_ = std::max(max_source_length_, source.size());
}

const std::vector<PhraseOption>& PhraseTable::lookup(const Sentence& source) const {
  return lookup(join_tokens(source));
}

const std::vector<PhraseOption>& PhraseTable::lookup(std::string_view joined_source) const {
  static const std::vector<PhraseOption> kEmpty;
  auto it = entries_.find(joined_source);
  return it == entries_.end() ? kEmpty : it->second;
}

std::size_t PhraseTable::size() const {
  std::size_t total = 0;
  for (const auto& [src, options] : entries_) total += options.size();
  return total;
}

double lexical_weight(const Sentence& source, const Sentence& target,
                      const std::set<std::pair<std::size_t, std::size_t>>& links, const LexicalTable& table) {
  double weight = 1.0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    double sum = 0.0;
    std::size_t linked = 0;
    for (const auto& [i, jj] : links) {
      if (jj != j) continue;
      sum += table.prob(source[i], target[j]);
      ++linked;
    }
    weight *= linked ? sum / static_cast<double>(linked) : table.prob(LexicalTable::kNullWord, target[j]);
  }
  return weight;
}

PhraseTable build_table(const ParallelCorpus& corpus, const std::vector<AlignmentMatrix>& alignments,
                        const LexicalTable& forward, const LexicalTable& reverse, std::size_t max_phrase_len) {
  if (corpus.size() != alignments.size()) {
    throw ParameterError("build_table: " + std::to_string(corpus.size()) + " sentence pairs but " +
                         std::to_string(alignments.size()) + " alignments");
  }
  struct Stats {
    Sentence source;
    Sentence target;
    double count = 0.0;
    double lex_tgt = 0.0;
    double lex_src = 0.0;
  };
  std::map<std::pair<std::string, std::string>, Stats> pairs;
  std::unordered_map<std::string, double> src_totals;
  std::unordered_map<std::string, double> tgt_totals;

  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (auto& phrase : extract_consistent(corpus[s], alignments[s], max_phrase_len)) {
      std::set<std::pair<std::size_t, std::size_t>> inside;
      std::set<std::pair<std::size_t, std::size_t>> inside_flipped;
      for (const auto& [i, j] : alignments[s].links) {
        if (i >= phrase.span.src_begin && i < phrase.span.src_end && j >= phrase.span.tgt_begin &&
            j < phrase.span.tgt_end) {
          inside.emplace(i - phrase.span.src_begin, j - phrase.span.tgt_begin);
          inside_flipped.emplace(j - phrase.span.tgt_begin, i - phrase.span.src_begin);
        }
      }
      const double lex_tgt = lexical_weight(phrase.source, phrase.target, inside, forward);
      const double lex_src = lexical_weight(phrase.target, phrase.source, inside_flipped, reverse);
      auto src_key = join_tokens(phrase.source);
      auto tgt_key = join_tokens(phrase.target);
      auto& stats = pairs[{src_key, tgt_key}];
      if (stats.count == 0.0) {
        stats.source = std::move(phrase.source);
        stats.target = std::move(phrase.target);
      }
      stats.count += 1.0;
      // Multiple internal alignments: keep the best lexical weight.
      stats.lex_tgt = std::max(stats.lex_tgt, lex_tgt);
      stats.lex_src = std::max(stats.lex_src, lex_src);
      src_totals[src_key] += 1.0;
      tgt_totals[tgt_key] += 1.0;
    }
  }

  PhraseTable table;
  for (const auto& [key, stats] : pairs) {
    PhraseOption option;
    option.target = stats.target;
    option.scores.phi_tgt_given_src = stats.count / src_totals[key.first];
    option.scores.phi_src_given_tgt = stats.count / tgt_totals[key.second];
    option.scores.lex_tgt_given_src = stats.lex_tgt;
    option.scores.lex_src_given_tgt = stats.lex_src;
    table.add(stats.source, std::move(option));
  }
  return table;
}

std::string write_table(const PhraseTable& table) {
  std::string out;
  char buf[128];
  for (const auto& [src, options] : table.entries()) {
    for (const auto& option : options) {
      const auto& s = option.scores;
      std::snprintf(buf, sizeof buf, "%.6g %.6g %.6g %.6g", s.phi_tgt_given_src, s.phi_src_given_tgt,
                    s.lex_tgt_given_src, s.lex_src_given_tgt);
      out += src + " ||| " + join_tokens(option.target) + " ||| " + buf + "\n";
    }
  }
  return out;
}

PhraseTable read_table(std::string_view text) {
  PhraseTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
      const auto sep = line.find("|||", start);
      fields.push_back(line.substr(start, sep == std::string_view::npos ? std::string_view::npos : sep - start));
      if (sep == std::string_view::npos) break;
      start = sep + 3;
    }
    if (fields.size() != 3) throw ParseError("expected 3 '|||'-separated fields, got " + std::to_string(fields.size()), line_no);
    const auto source = parse_plain_corpus(fields[0]);
    const auto target = parse_plain_corpus(fields[1]);
    const auto scores = parse_plain_corpus(fields[2]);
    if (source.empty() || source[0].empty() || target.empty() || target[0].empty()) {
      throw ParseError("empty phrase", line_no);
    }
    if (scores.empty() || scores[0].size() != 4) {
      throw ParseError("expected 4 scores, got " + std::to_string(scores.empty() ? 0 : scores[0].size()), line_no);
    }
    double values[4];
    for (std::size_t k = 0; k < 4; ++k) {
      const auto& field = scores[0][k];
      char* stop = nullptr;
      values[k] = std::strtod(field.c_str(), &stop);
      if (stop != field.c_str() + field.size()) throw ParseError("bad score '" + field + "'", line_no);
    }
    table.add(source[0], PhraseOption{target[0], {values[0], values[1], values[2], values[3]}});
  }
  return table;
}

}  // namespace hmt
