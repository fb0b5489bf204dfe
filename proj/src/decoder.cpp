#include "hmt/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>
#include <unordered_map>

#include "hmt/error.hpp"

namespace hmt {

namespace {

Sentence slice(const Sentence& s, std::size_t begin, std::size_t end) {
  return Sentence(s.begin() + static_cast<std::ptrdiff_t>(begin), s.begin() + static_cast<std::ptrdiff_t>(end));
}

PhraseScores oov_scores() {
  return {kOovFeatureFloor, kOovFeatureFloor, kOovFeatureFloor, kOovFeatureFloor};
}

// LM score of a phrase using only the context inside the phrase.
double phrase_lm_estimate(const Sentence& target, const NgramModel& lm) {
  const auto history = static_cast<std::size_t>(lm.order() - 1);
  std::vector<WordId> ids = lm.vocab().map(target);
  double total = 0.0;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const std::size_t ctx = std::min(k, history);
    total += lm.logprob(std::span<const WordId>(ids.data() + k - ctx, ctx), ids[k]);
  }
  return total;
}

struct Hypothesis {
  std::vector<bool> coverage;
  std::size_t covered = 0;
  std::size_t last_end = 0;
  std::vector<WordId> lm_state;
  double accumulated = 0.0;
  double future = 0.0;
  std::ptrdiff_t parent = -1;
  std::ptrdiff_t option = -1;

  double total() const { return accumulated + future; }
};

std::string recombination_key(const Hypothesis& h) {
  std::string key;
  key.reserve(h.coverage.size() + (h.lm_state.size() + 1) * sizeof(WordId));
  for (bool b : h.coverage) key += b ? '1' : '0';
  auto append = [&key](std::uint64_t v) { key.append(reinterpret_cast<const char*>(&v), sizeof v); };
  append(h.last_end);
  for (auto w : h.lm_state) append(w);
  return key;
}

double coverage_future(const std::vector<bool>& coverage, const FutureCostTable& fc) {
  double total = 0.0;
  std::size_t i = 0;
  const std::size_t n = coverage.size();
  while (i < n) {
    if (coverage[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && !coverage[j]) ++j;
    total += fc.at(i, j);
    i = j;
  }
  return total;
}

class StackDecoder {
 public:
  StackDecoder(const Sentence& sentence, const PhraseTable& table, const NgramModel& lm, const DecoderConfig& config)
      : sentence_(sentence), lm_(lm), config_(config), options_(collect_options(sentence, table)) {
    fc_ = future_cost(sentence, table, lm, config);
    option_static_.reserve(options_.size());
    option_ids_.reserve(options_.size());
    for (const auto& opt : options_) {
      option_static_.push_back(option_score(opt.scores, opt.target.size(), config));
      option_ids_.push_back(lm.vocab().map(opt.target));
    }
  }

  // Returns false when no complete hypothesis survives.
  bool run(int distortion_limit, Translation& out, std::vector<StackTrace>* trace) {
    const std::size_t n = sentence_.size();
    arena_.clear();
    std::vector<std::unordered_map<std::string, std::size_t>> stacks(n + 1);

    Hypothesis root;
    root.coverage.assign(n, false);
    root.lm_state.assign(static_cast<std::size_t>(lm_.order() - 1), Vocab::kBos);
    root.future = coverage_future(root.coverage, fc_);
    arena_.push_back(root);
    stacks[0].emplace(recombination_key(root), 0);

    for (std::size_t card = 0; card <= n; ++card) {
      auto survivors = prune(stacks[card]);
      if (trace) {
        StackTrace t;
        t.cardinality = card;
        t.size_after_pruning = survivors.size();
        t.best_score = survivors.empty() ? FutureCostTable::kUncoverable : arena_[survivors.front()].total();
        trace->push_back(t);
      }
      if (card == n) return finish(survivors, out);
      for (std::size_t h : survivors) expand(h, distortion_limit, stacks);
    }
    return false;
  }

 private:
  std::vector<std::size_t> prune(const std::unordered_map<std::string, std::size_t>& stack) const {
    std::vector<std::size_t> hyps;
    hyps.reserve(stack.size());
    for (const auto& [key, idx] : stack) hyps.push_back(idx);
    std::sort(hyps.begin(), hyps.end(), [&](std::size_t a, std::size_t b) {
      const double sa = arena_[a].total();
      const double sb = arena_[b].total();
      return sa != sb ? sa > sb : a < b;
    });
    if (hyps.size() > config_.stack_size) hyps.resize(config_.stack_size);
    if (!hyps.empty() && std::isfinite(config_.beam_threshold)) {
      const double floor = arena_[hyps.front()].total() - config_.beam_threshold;
      while (!hyps.empty() && arena_[hyps.back()].total() < floor) hyps.pop_back();
    }
    return hyps;
  }

  void expand(std::size_t parent_idx, int distortion_limit,
              std::vector<std::unordered_map<std::string, std::size_t>>& stacks) {
    const std::size_t n = sentence_.size();
    const std::size_t history = static_cast<std::size_t>(lm_.order() - 1);
    for (std::size_t o = 0; o < options_.size(); ++o) {
      const auto& opt = options_[o];
      const Hypothesis& parent = arena_[parent_idx];
      bool overlap = false;
      for (std::size_t i = opt.src_begin; i < opt.src_end && !overlap; ++i) overlap = parent.coverage[i];
      if (overlap) continue;
      const auto jump = static_cast<std::size_t>(
          std::abs(static_cast<std::ptrdiff_t>(opt.src_begin) - static_cast<std::ptrdiff_t>(parent.last_end)));
      if (distortion_limit >= 0 && jump > static_cast<std::size_t>(distortion_limit)) continue;

      Hypothesis next;
      next.coverage = parent.coverage;
      for (std::size_t i = opt.src_begin; i < opt.src_end; ++i) next.coverage[i] = true;
      if (distortion_limit >= 0) {
        // The jump back to the first gap must stay reachable.
        std::size_t gap = 0;
        while (gap < n && next.coverage[gap]) ++gap;
        if (gap < opt.src_begin && opt.src_end - gap > static_cast<std::size_t>(distortion_limit)) continue;
      }
      next.covered = parent.covered + (opt.src_end - opt.src_begin);
      next.last_end = opt.src_end;

      double lm_score = 0.0;
      std::vector<WordId> context = parent.lm_state;
      for (WordId w : option_ids_[o]) {
        lm_score += lm_.logprob(std::span<const WordId>(context.data() + context.size() - history, history), w);
        context.push_back(w);
      }
      next.lm_state.assign(context.end() - static_cast<std::ptrdiff_t>(history), context.end());
      const auto& w = config_.weights;
      next.accumulated = parent.accumulated + option_static_[o] + w.lm * lm_score -
                         w.distortion * static_cast<double>(jump);
      next.future = coverage_future(next.coverage, fc_);
      next.parent = static_cast<std::ptrdiff_t>(parent_idx);
      next.option = static_cast<std::ptrdiff_t>(o);

      auto& stack = stacks[next.covered];
      auto key = recombination_key(next);
      auto it = stack.find(key);
      if (it == stack.end()) {
        arena_.push_back(std::move(next));
        stack.emplace(std::move(key), arena_.size() - 1);
      } else if (next.accumulated > arena_[it->second].accumulated) {
        arena_.push_back(std::move(next));
        it->second = arena_.size() - 1;
      }
    }
  }

  bool finish(const std::vector<std::size_t>& complete, Translation& out) const {
    const std::size_t history = static_cast<std::size_t>(lm_.order() - 1);
    std::ptrdiff_t best = -1;
    double best_score = 0.0;
    for (std::size_t h : complete) {
      const auto& hyp = arena_[h];
      const double score =
          hyp.accumulated +
          config_.weights.lm * lm_.logprob(std::span<const WordId>(hyp.lm_state.data(), history), Vocab::kEos);
      if (best < 0 || score > best_score) {
        best = static_cast<std::ptrdiff_t>(h);
        best_score = score;
      }
    }
    if (best < 0) return false;

    std::vector<std::size_t> chain;
    for (auto h = best; arena_[static_cast<std::size_t>(h)].parent >= 0; h = arena_[static_cast<std::size_t>(h)].parent) {
      chain.push_back(static_cast<std::size_t>(arena_[static_cast<std::size_t>(h)].option));
    }
    std::reverse(chain.begin(), chain.end());
    out = Translation{};
    out.model_score = best_score;
    for (std::size_t o : chain) {
      const auto& opt = options_[o];
      out.segmentation.push_back({opt.src_begin, opt.src_end, opt.target});
      out.tokens.insert(out.tokens.end(), opt.target.begin(), opt.target.end());
    }
    return true;
  }

  const Sentence& sentence_;
  const NgramModel& lm_;
  const DecoderConfig& config_;
  std::vector<SpanOption> options_;
  std::vector<double> option_static_;
  std::vector<std::vector<WordId>> option_ids_;
  FutureCostTable fc_;
  std::vector<Hypothesis> arena_;
};

}  // namespace

std::vector<SpanOption> collect_options(const Sentence& sentence, const PhraseTable& table) {
  std::vector<SpanOption> options;
  const std::size_t n = sentence.size();
  const std::size_t longest = std::max<std::size_t>(1, table.max_source_length());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j <= std::min(n, i + longest); ++j) {
      const auto& found = table.lookup(slice(sentence, i, j));
      for (const auto& option : found) options.push_back({i, j, option.target, option.scores, false});
      if (j == i + 1 && found.empty()) options.push_back({i, j, {sentence[i]}, oov_scores(), true});
    }
  }
  return options;
}

double option_score(const PhraseScores& s, std::size_t target_length, const DecoderConfig& config) {
  const auto& w = config.weights;
  return w.phi_tgt_given_src * std::log10(s.phi_tgt_given_src) + w.phi_src_given_tgt * std::log10(s.phi_src_given_tgt) +
         w.lex_tgt_given_src * std::log10(s.lex_tgt_given_src) + w.lex_src_given_tgt * std::log10(s.lex_src_given_tgt) +
         w.word_penalty * static_cast<double>(target_length);
}

FutureCostTable future_cost(const Sentence& sentence, const PhraseTable& table, const NgramModel& lm,
                            const DecoderConfig& config) {
  const std::size_t n = sentence.size();
  FutureCostTable fc(n);
  for (const auto& opt : collect_options(sentence, table)) {
    const double score =
        option_score(opt.scores, opt.target.size(), config) + config.weights.lm * phrase_lm_estimate(opt.target, lm);
    fc.at(opt.src_begin, opt.src_end) = std::max(fc.at(opt.src_begin, opt.src_end), score);
  }
  for (std::size_t len = 2; len <= n; ++len) {
    for (std::size_t i = 0; i + len <= n; ++i) {
      const std::size_t k = i + len;
      for (std::size_t j = i + 1; j < k; ++j) fc.at(i, k) = std::max(fc.at(i, k), fc.at(i, j) + fc.at(j, k));
    }
  }
  return fc;
}

double score_hypothesis(const Sentence& source, const std::vector<TranslationSegment>& segmentation,
                        const PhraseTable& table, const NgramModel& lm, const DecoderConfig& config) {
  std::vector<bool> covered(source.size(), false);
  Sentence target;
  double score = 0.0;
  std::size_t last_end = 0;
  for (const auto& seg : segmentation) {
    if (seg.src_begin >= seg.src_end || seg.src_end > source.size()) {
      throw ParameterError("score_hypothesis: segment span out of range");
    }
    for (std::size_t i = seg.src_begin; i < seg.src_end; ++i) {
      if (covered[i]) throw ParameterError("score_hypothesis: source position " + std::to_string(i) + " covered twice");
      covered[i] = true;
    }
    const auto src = slice(source, seg.src_begin, seg.src_end);
    const auto& options = table.lookup(src);
    // Duplicate entries for one phrase pair: the decoder may use any, so take the best.
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& o : options) {
      if (o.target == seg.target) best = std::max(best, option_score(o.scores, seg.target.size(), config));
    }
    if (options.empty() && src.size() == 1 && seg.target == src) {
      best = option_score(oov_scores(), 1, config);
    } else if (best == -std::numeric_limits<double>::infinity()) {
      throw ParameterError("score_hypothesis: no table entry for '" + join_tokens(src) + "' -> '" +
                           join_tokens(seg.target) + "'");
    }
    score += best;
    score -= config.weights.distortion *
             static_cast<double>(std::abs(static_cast<std::ptrdiff_t>(seg.src_begin) - static_cast<std::ptrdiff_t>(last_end)));
    last_end = seg.src_end;
    target.insert(target.end(), seg.target.begin(), seg.target.end());
  }
  if (std::find(covered.begin(), covered.end(), false) != covered.end()) {
    throw ParameterError("score_hypothesis: segmentation does not cover the whole source");
  }
  return score + config.weights.lm * sentence_logprob(lm, target);
}

Translation decode(const Sentence& sentence, const PhraseTable& table, const NgramModel& lm,
                   const DecoderConfig& config, std::vector<StackTrace>* trace) {
  if (config.stack_size < 1) throw ParameterError("decode: stack_size must be >= 1");
  if (sentence.empty()) return {};
  StackDecoder decoder(sentence, table, lm, config);
  Translation out;
  if (decoder.run(config.distortion_limit, out, trace)) return out;
  // A too-tight distortion limit can strand every hypothesis; retry unlimited.
  if (trace) trace->clear();
  decoder.run(-1, out, trace);
  return out;
}

}  // namespace hmt
