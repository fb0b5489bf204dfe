#include "hmt/metrics.hpp"

#include <unicode/utf8.h>

#include <cmath>
#include <cstdio>
#include <map>

#include "hmt/error.hpp"

namespace hmt {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, std::size_t n) {
  NgramCounts counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) ++counts[Sentence(s.begin() + i, s.begin() + i + n)];
  return counts;
}

Sentence lowercase(const Sentence& s) {
  Sentence out;
  out.reserve(s.size());
  for (const auto& w : s) out.push_back(to_lower(w));
  return out;
}

std::u32string code_points(std::string_view text) {
  std::u32string out;
  const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    UChar32 c = 0;
    U8_NEXT(s, i, length, c);
    if (c < 0) throw EncodingError("invalid UTF-8 in evaluation text");
    out.push_back(static_cast<char32_t>(c));
  }
  return out;
}

// Greedy block-shift search: scan starts left to right, phrase lengths
// shortest first, destinations left to right, and take the first shift that
// lowers cost. Repeats until no shift helps. Returns the number of shifts.
template <typename Cost, typename Occurs>
std::size_t greedy_shifts(Sentence& hyp, std::size_t max_len, Cost cost, Occurs occurs) {
  std::size_t shifts = 0;
  std::size_t current = cost(hyp);
  bool improved = true;
  while (improved && current > 0) {
    improved = false;
    const std::size_t n = hyp.size();
    for (std::size_t i = 0; i < n && !improved; ++i) {
      for (std::size_t len = 1; len <= max_len && i + len <= n && !improved; ++len) {
        const Sentence phrase(hyp.begin() + i, hyp.begin() + i + len);
        if (!occurs(phrase)) break;  // longer phrases cannot occur either
        Sentence rest(hyp.begin(), hyp.begin() + i);
        rest.insert(rest.end(), hyp.begin() + i + len, hyp.end());
        for (std::size_t j = 0; j <= rest.size(); ++j) {
          if (j == i) continue;
          Sentence candidate(rest.begin(), rest.begin() + j);
          candidate.insert(candidate.end(), phrase.begin(), phrase.end());
          candidate.insert(candidate.end(), rest.begin() + j, rest.end());
          const std::size_t c = cost(candidate);
          if (c < current) {
            hyp = std::move(candidate);
            current = c;
            ++shifts;
            improved = true;
            break;
          }
        }
      }
    }
  }
  return shifts;
}

template <typename Match>
bool occurs_in(const Sentence& phrase, const Sentence& ref, Match match) {
  for (std::size_t k = 0; k + phrase.size() <= ref.size(); ++k) {
    bool all = true;
    for (std::size_t m = 0; m < phrase.size() && all; ++m) all = match(phrase[m], ref[k + m]);
    if (all) return true;
  }
  return false;
}

bool similar_words(const std::string& a, const std::string& b) {
  if (a == b) return true;
  const auto ca = code_points(a);
  const auto cb = code_points(b);
  const std::size_t longest = std::max(ca.size(), cb.size());
  if (longest == 0) return true;
  return 1.0 - static_cast<double>(edit_distance(ca, cb)) / static_cast<double>(longest) > 0.8;
}

void require_pairs(const std::vector<EvalPair>& pairs, const char* metric) {
  if (pairs.empty()) throw ParameterError(std::string(metric) + ": empty pair list");
}

}  // namespace

std::vector<EvalPair> make_eval_pairs(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  if (hypotheses.size() != references.size()) {
    throw ParameterError("hypothesis has " + std::to_string(hypotheses.size()) + " lines but reference has " +
                         std::to_string(references.size()));
  }
  std::vector<EvalPair> pairs;
  pairs.reserve(hypotheses.size());
  for (std::size_t i = 0; i < hypotheses.size(); ++i) pairs.push_back({hypotheses[i], references[i]});
  return pairs;
}

double bleu(const std::vector<EvalPair>& pairs, std::size_t max_n, bool cased) {
  require_pairs(pairs, "bleu");
  if (max_n == 0) throw ParameterError("bleu: max_n must be positive");
  std::vector<std::size_t> matches(max_n, 0);
  std::vector<std::size_t> totals(max_n, 0);
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  for (const auto& pair : pairs) {
    const Sentence hyp = cased ? pair.hypothesis : lowercase(pair.hypothesis);
    const Sentence ref = cased ? pair.reference : lowercase(pair.reference);
    hyp_len += hyp.size();
    ref_len += ref.size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto ref_counts = count_ngrams(ref, n);
      for (const auto& [gram, count] : count_ngrams(hyp, n)) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
        totals[n - 1] += count;
      }
    }
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < max_n; ++n) {
    if (matches[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matches[n]) / static_cast<double>(totals[n]));
  }
  const double brevity =
      hyp_len < ref_len ? 1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len) : 0.0;
  return 100.0 * std::exp(brevity + log_sum / static_cast<double>(max_n));
}

std::size_t ter_edits(const Sentence& hypothesis, const Sentence& reference, const TerOptions& options) {
  Sentence hyp = hypothesis;
  std::size_t shifts = 0;
  if (options.shifts) {
    shifts = greedy_shifts(
        hyp, options.max_shift_length, [&](const Sentence& h) { return edit_distance(h, reference); },
        [&](const Sentence& phrase) {
          return occurs_in(phrase, reference, [](const std::string& a, const std::string& b) { return a == b; });
        });
  }
  return shifts + edit_distance(hyp, reference);
}

TerResult ter_detail(const std::vector<EvalPair>& pairs, const TerOptions& options) {
  require_pairs(pairs, "ter");
  TerResult result;
  for (const auto& pair : pairs) {
    if (pair.reference.empty()) {
      ++result.excluded;
      continue;
    }
    result.edits += ter_edits(pair.hypothesis, pair.reference, options);
    result.reference_words += pair.reference.size();
  }
  if (result.reference_words == 0) throw ParameterError("ter: every reference is empty");
  result.score = static_cast<double>(result.edits) / static_cast<double>(result.reference_words);
  return result;
}

double ter(const std::vector<EvalPair>& pairs, const TerOptions& options) { return ter_detail(pairs, options).score; }

CharacterResult character_detail(const std::vector<EvalPair>& pairs) {
  require_pairs(pairs, "character");
  CharacterResult result;
  double total = 0.0;
  for (const auto& pair : pairs) {
    if (pair.hypothesis.empty()) {
      ++result.empty_hypotheses;
      total += 1.0;
      continue;
    }
    const auto ref_chars = code_points(join_tokens(pair.reference));
    Sentence hyp = pair.hypothesis;
    const std::size_t shifts = greedy_shifts(
        hyp, 10, [&](const Sentence& h) { return edit_distance(code_points(join_tokens(h)), ref_chars); },
        [&](const Sentence& phrase) { return occurs_in(phrase, pair.reference, similar_words); });
    const std::size_t edits = edit_distance(code_points(join_tokens(hyp)), ref_chars);
    const auto hyp_chars = code_points(join_tokens(pair.hypothesis)).size();
    total += static_cast<double>(shifts + edits) / static_cast<double>(hyp_chars);
  }
  result.score = total / static_cast<double>(pairs.size());
  return result;
}

double character(const std::vector<EvalPair>& pairs) { return character_detail(pairs).score; }

MetricScores score_all(const std::vector<EvalPair>& pairs) {
  return {bleu(pairs, 4, false), bleu(pairs, 4, true), ter(pairs), character(pairs)};
}

std::string format_scores(const MetricScores& scores) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "BLEU\t%.4f\nBLEU-cased\t%.4f\nTER\t%.4f\nCharacTER\t%.4f\n", scores.bleu,
                scores.bleu_cased, scores.ter, scores.character);
  return buf;
}

}  // namespace hmt
