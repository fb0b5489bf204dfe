#include "hmt/ngram_lm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>

#include "hmt/error.hpp"

namespace hmt {

Vocab::Vocab() {
  add(kBosWord);
  add(kEosWord);
  add(kUnkWord);
}

Vocab Vocab::build(const std::vector<Sentence>& corpus) {
  Vocab vocab;
  for (const auto& sentence : corpus) {
    for (const auto& token : sentence) vocab.add(token);
  }
  return vocab;
}

WordId Vocab::add(std::string_view word) {
  auto [it, inserted] = ids_.try_emplace(std::string(word), static_cast<WordId>(words_.size()));
  if (inserted) words_.emplace_back(word);
  return it->second;
}

std::optional<WordId> Vocab::find(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

WordId Vocab::id(std::string_view word) const { return find(word).value_or(kUnk); }

std::vector<WordId> Vocab::map(const Sentence& sentence) const {
  std::vector<WordId> ids;
  ids.reserve(sentence.size());
  for (const auto& token : sentence) ids.push_back(id(token));
  return ids;
}

std::size_t NgramKeyHash::operator()(const std::vector<WordId>& key) const noexcept {
  std::size_t h = 1469598103934665603ULL;
  for (WordId w : key) {
    h ^= w;
    h *= 1099511628211ULL;
  }
  return h;
}

NgramCounts count_ngrams(const std::vector<Sentence>& corpus, const Vocab& vocab, int order) {
  if (order < 1) throw ParameterError("count_ngrams: order must be >= 1, got " + std::to_string(order));
  NgramCounts counts;
  counts.order = order;
  counts.vocab = vocab;
  counts.counts.resize(static_cast<std::size_t>(order));
  std::vector<WordId> padded;
  std::vector<WordId> key;
  for (const auto& sentence : corpus) {
    padded.assign(static_cast<std::size_t>(order - 1), Vocab::kBos);
    for (const auto& token : sentence) padded.push_back(vocab.id(token));
    padded.push_back(Vocab::kEos);
    for (std::size_t pos = static_cast<std::size_t>(order - 1); pos < padded.size(); ++pos) {
      for (int n = 1; n <= order; ++n) {
        key.assign(padded.begin() + static_cast<std::ptrdiff_t>(pos + 1 - static_cast<std::size_t>(n)),
                   padded.begin() + static_cast<std::ptrdiff_t>(pos + 1));
        ++counts.counts[static_cast<std::size_t>(n - 1)][key];
      }
    }
  }
  return counts;
}

NgramModel::NgramModel(Vocab vocab, std::vector<OrderEntries> entries) : vocab_(std::move(vocab)) {
  tables_.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto& table = tables_[i];
    table.n = static_cast<int>(i + 1);
    auto& list = entries[i];
    for (auto& [ngram, entry] : list) {
      if (ngram.size() != i + 1) throw ParameterError("n-gram of wrong length in order " + std::to_string(i + 1));
      std::reverse(ngram.begin(), ngram.end());
    }
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    table.keys.reserve(list.size() * (i + 1));
    for (const auto& [reversed, entry] : list) {
      table.keys.insert(table.keys.end(), reversed.begin(), reversed.end());
      table.probs.push_back(entry.log10_prob);
      table.backoffs.push_back(entry.log10_backoff);
    }
  }
}

std::optional<std::size_t> NgramModel::locate(const Table& table, std::span<const WordId> ngram) const {
  const auto n = static_cast<std::size_t>(table.n);
  std::array<WordId, 16> small{};
  std::vector<WordId> large;
  WordId* reversed = small.data();
  if (n > small.size()) {
    large.resize(n);
    reversed = large.data();
  }
  for (std::size_t i = 0; i < n; ++i) reversed[i] = ngram[n - 1 - i];

  std::size_t lo = 0;
  std::size_t hi = table.probs.size();
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    const WordId* key = table.keys.data() + mid * n;
    const bool less = std::lexicographical_compare(key, key + n, reversed, reversed + n);
    if (less) {
      lo = mid + 1;
    } else {
      hi = mid;
    }
  }
  if (lo < table.probs.size() && std::equal(reversed, reversed + n, table.keys.data() + lo * n)) return lo;
  return std::nullopt;
}

std::optional<NgramEntry> NgramModel::find(std::span<const WordId> ngram) const {
  if (ngram.empty() || ngram.size() > tables_.size()) return std::nullopt;
  const auto& table = tables_[ngram.size() - 1];
  if (auto idx = locate(table, ngram)) return NgramEntry{table.probs[*idx], table.backoffs[*idx]};
  return std::nullopt;
}

double NgramModel::logprob(std::span<const WordId> context, WordId word) const {
  if (static_cast<int>(context.size()) > order() - 1) {
    throw ParameterError("logprob: context of length " + std::to_string(context.size()) + " exceeds order-1 = " +
                         std::to_string(order() - 1));
  }
  std::array<WordId, 16> small{};
  std::vector<WordId> large;
  const std::size_t k = context.size();
  WordId* ngram = small.data();
  if (k + 1 > small.size()) {
    large.resize(k + 1);
    ngram = large.data();
  }
  std::copy(context.begin(), context.end(), ngram);
  ngram[k] = word;

  double backoff = 0.0;
  for (std::size_t start = 0; start <= k; ++start) {
    const std::span<const WordId> full(ngram + start, k + 1 - start);
    const auto& table = tables_[full.size() - 1];
    if (auto idx = locate(table, full)) return backoff + table.probs[*idx];
    // The shortened context's backoff weight applies on the way down.
    const std::span<const WordId> ctx(ngram + start, k - start);
    if (!ctx.empty()) {
      if (auto c = find(ctx)) backoff += c->log10_backoff;
    }
  }
  if (word != Vocab::kUnk) {
    if (auto unk = find(std::span<const WordId>(&Vocab::kUnk, 1))) return backoff + unk->log10_prob;
  }
  return backoff + kImpossible;
}

void NgramModel::for_each(int n, const std::function<void(std::span<const WordId>, const NgramEntry&)>& fn) const {
  const auto& table = tables_.at(static_cast<std::size_t>(n - 1));
  const auto width = static_cast<std::size_t>(n);
  std::vector<std::vector<WordId>> forward(table.probs.size());
  std::vector<std::size_t> order(table.probs.size());
  for (std::size_t i = 0; i < table.probs.size(); ++i) {
    const WordId* key = table.keys.data() + i * width;
    forward[i].assign(std::reverse_iterator(key + width), std::reverse_iterator(key));
    order[i] = i;
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return forward[a] < forward[b]; });
  for (std::size_t i : order) fn(forward[i], NgramEntry{table.probs[i], table.backoffs[i]});
}

namespace {

struct Discounts {
  std::array<double, 4> d{0.0, 0.75, 0.75, 0.75};  // index by min(count, 3)
  bool fallback = true;

  double operator()(std::uint64_t count) const { return d[std::min<std::uint64_t>(count, 3)]; }
};

Discounts discounts_for(const std::map<std::vector<WordId>, std::uint64_t>& adjusted) {
  std::array<double, 5> coc{};
  for (const auto& [ngram, a] : adjusted) {
    if (a >= 1 && a <= 4) coc[a] += 1.0;
  }
  Discounts out;
  if (coc[1] == 0 || coc[2] == 0 || coc[3] == 0) return out;
  const double y = coc[1] / (coc[1] + 2.0 * coc[2]);
  std::array<double, 4> d{0.0, 0.0, 0.0, 0.0};
  for (int k = 1; k <= 3; ++k) {
    d[k] = k - (k + 1) * y * coc[k + 1] / coc[k];
    if (!(d[k] > 0.0 && d[k] <= k)) return out;
  }
  out.d = d;
  out.fallback = false;
  return out;
}

}  // namespace

NgramModel estimate_kn(const NgramCounts& counts) {
  const int order = counts.order;
  if (order < 1 || counts.counts.size() != static_cast<std::size_t>(order)) {
    throw ParameterError("estimate_kn: malformed counts");
  }
  if (counts.counts[0].empty()) throw ParameterError("estimate_kn: counts are empty");
  const Vocab& vocab = counts.vocab;

  // Adjusted counts: raw counts at the top order, continuation counts (number
  // of distinct left extensions) below it.
  std::vector<std::map<std::vector<WordId>, std::uint64_t>> adjusted(static_cast<std::size_t>(order));
  for (const auto& [ngram, c] : counts.counts.back()) adjusted.back()[ngram] = c;
  for (int n = order - 1; n >= 1; --n) {
    auto& lower = adjusted[static_cast<std::size_t>(n - 1)];
    for (const auto& [ngram, c] : counts.counts[static_cast<std::size_t>(n)]) {
      ++lower[std::vector<WordId>(ngram.begin() + 1, ngram.end())];
    }
  }
  // Every predictable vocabulary word gets a unigram, possibly with count 0.
  for (WordId w = 0; w < vocab.size(); ++w) {
    if (w != Vocab::kBos) adjusted[0].try_emplace(std::vector<WordId>{w}, 0);
  }
  const double predictable = static_cast<double>(vocab.size() - 1);

  std::vector<NgramModel::OrderEntries> entries(static_cast<std::size_t>(order));
  // Interpolated probabilities per order, forward keys.
  std::vector<std::map<std::vector<WordId>, double>> prob(static_cast<std::size_t>(order));
  std::vector<std::map<std::vector<WordId>, double>> gamma(static_cast<std::size_t>(order));
  std::vector<int> fallback_orders;

  for (int n = 1; n <= order; ++n) {
    const auto idx = static_cast<std::size_t>(n - 1);
    const Discounts discount = discounts_for(adjusted[idx]);
    if (discount.fallback) fallback_orders.push_back(n);

    struct ContextStats {
      double total = 0.0;
      std::array<double, 4> types{};  // N1, N2, N3+
    };
    std::map<std::vector<WordId>, ContextStats> contexts;
    for (const auto& [ngram, a] : adjusted[idx]) {
      auto& stats = contexts[std::vector<WordId>(ngram.begin(), ngram.end() - 1)];
      stats.total += static_cast<double>(a);
      if (a > 0) stats.types[std::min<std::uint64_t>(a, 3)] += 1.0;
    }
    for (const auto& [ctx, stats] : contexts) {
      const double mass = discount.d[1] * stats.types[1] + discount.d[2] * stats.types[2] +
                          discount.d[3] * stats.types[3];
      gamma[idx][ctx] = stats.total > 0.0 ? mass / stats.total : 1.0;
    }
    for (const auto& [ngram, a] : adjusted[idx]) {
      const std::vector<WordId> ctx(ngram.begin(), ngram.end() - 1);
      const auto& stats = contexts[ctx];
      const double g = gamma[idx][ctx];
      const double own = stats.total > 0.0 ? (static_cast<double>(a) - discount(a)) / stats.total : 0.0;
      double lower = 1.0 / predictable;
      if (n > 1) lower = prob[idx - 1].at(std::vector<WordId>(ngram.begin() + 1, ngram.end()));
      prob[idx][ngram] = own + g * lower;
    }
  }

  // Contexts consisting only of <s> padding are stored as impossible n-grams
  // so they can carry a backoff weight.
  for (int n = 1; n < order; ++n) {
    const std::vector<WordId> bos(static_cast<std::size_t>(n), Vocab::kBos);
    if (gamma[static_cast<std::size_t>(n)].count(bos)) prob[static_cast<std::size_t>(n - 1)].try_emplace(bos, -1.0);
  }

  for (int n = 1; n <= order; ++n) {
    const auto idx = static_cast<std::size_t>(n - 1);
    auto& list = entries[idx];
    list.reserve(prob[idx].size());
    for (const auto& [ngram, p] : prob[idx]) {
      NgramEntry entry;
      entry.log10_prob = p < 0.0 ? NgramModel::kImpossible : std::log10(p);
      if (n < order) {
        auto it = gamma[idx + 1].find(ngram);
        if (it != gamma[idx + 1].end()) entry.log10_backoff = std::log10(it->second);
      }
      list.emplace_back(ngram, entry);
    }
  }
  NgramModel model(vocab, std::move(entries));
  model.fallback_orders = std::move(fallback_orders);
  return model;
}

double sentence_logprob(const NgramModel& model, const Sentence& sentence) {
  const auto history = static_cast<std::size_t>(model.order() - 1);
  std::vector<WordId> padded(history, Vocab::kBos);
  for (const auto& token : sentence) padded.push_back(model.vocab().id(token));
  padded.push_back(Vocab::kEos);
  double total = 0.0;
  for (std::size_t pos = history; pos < padded.size(); ++pos) {
    total += model.logprob(std::span<const WordId>(padded.data() + pos - history, history), padded[pos]);
  }
  return total;
}

double perplexity(const NgramModel& model, const std::vector<Sentence>& corpus) {
  if (corpus.empty()) throw ParameterError("perplexity: corpus is empty");
  double total = 0.0;
  std::size_t predicted = 0;
  for (const auto& sentence : corpus) {
    total += sentence_logprob(model, sentence);
    predicted += sentence.size() + 1;
  }
  return std::pow(10.0, -total / static_cast<double>(predicted));
}

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.7g", v);
  return buf;
}

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_real(std::string_view text, std::size_t line) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ParseError("bad number '" + s + "'", line);
  return v;
}

}  // namespace

std::string write_arpa(const NgramModel& model) {
  std::string out = "\\data\\\n";
  for (int n = 1; n <= model.order(); ++n) {
    out += "ngram " + std::to_string(n) + "=" + std::to_string(model.size(n)) + "\n";
  }
  const auto& vocab = model.vocab();
  for (int n = 1; n <= model.order(); ++n) {
    out += "\n\\" + std::to_string(n) + "-grams:\n";
    const bool top = n == model.order();
    model.for_each(n, [&](std::span<const WordId> ngram, const NgramEntry& entry) {
      out += format_real(entry.log10_prob);
      out += '\t';
      for (std::size_t i = 0; i < ngram.size(); ++i) {
        if (i) out += ' ';
        out += vocab.word(ngram[i]);
      }
      if (!top && entry.log10_backoff != 0.0) {
        out += '\t';
        out += format_real(entry.log10_backoff);
      }
      out += '\n';
    });
  }
  out += "\n\\end\\\n";
  return out;
}

NgramModel read_arpa(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos < text.size();) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  std::size_t i = 0;
  auto skip_blank = [&] {
    while (i < lines.size() && lines[i].find_first_not_of(" \t") == std::string_view::npos) ++i;
  };
  skip_blank();
  if (i >= lines.size() || lines[i] != "\\data\\") throw ParseError("missing \\data\\ header", i + 1);
  ++i;
  std::vector<std::size_t> declared;
  while (i < lines.size() && lines[i].starts_with("ngram ")) {
    const auto spec = lines[i].substr(6);
    const auto eq = spec.find('=');
    if (eq == std::string_view::npos) throw ParseError("malformed ngram count line", i + 1);
    const auto n = static_cast<std::size_t>(parse_real(spec.substr(0, eq), i + 1));
    const auto c = static_cast<std::size_t>(parse_real(spec.substr(eq + 1), i + 1));
    if (n != declared.size() + 1) throw ParseError("ngram counts out of order", i + 1);
    declared.push_back(c);
    ++i;
  }
  if (declared.empty()) throw ParseError("no ngram counts in \\data\\ section", i + 1);

  Vocab vocab;
  std::vector<NgramModel::OrderEntries> entries(declared.size());
  for (std::size_t n = 1; n <= declared.size(); ++n) {
    skip_blank();
    const std::string header = "\\" + std::to_string(n) + "-grams:";
    if (i >= lines.size() || lines[i] != header) throw ParseError("expected " + header, i + 1);
    ++i;
    auto& list = entries[n - 1];
    while (i < lines.size() && !lines[i].empty() && lines[i].front() != '\\') {
      const auto fields = split_fields(lines[i], '\t');
      if (fields.size() < 2 || fields.size() > 3) throw ParseError("expected 2 or 3 tab-separated fields", i + 1);
      NgramEntry entry;
      entry.log10_prob = parse_real(fields[0], i + 1);
      if (fields.size() == 3) entry.log10_backoff = parse_real(fields[2], i + 1);
      std::vector<WordId> ngram;
      for (auto word : split_fields(fields[1], ' ')) {
        if (word.empty()) continue;
        if (n == 1) {
          ngram.push_back(vocab.add(word));
        } else {
          auto id = vocab.find(word);
          if (!id) throw ParseError("word '" + std::string(word) + "' missing from 1-grams", i + 1);
          ngram.push_back(*id);
        }
      }
      if (ngram.size() != n) throw ParseError("expected " + std::to_string(n) + " words", i + 1);
      list.emplace_back(std::move(ngram), entry);
      ++i;
    }
    if (list.size() != declared[n - 1]) {
      throw ParseError("section " + header + " declares " + std::to_string(declared[n - 1]) + " entries but has " +
                           std::to_string(list.size()),
                       i + 1);
    }
  }
  skip_blank();
  if (i >= lines.size() || lines[i] != "\\end\\") throw ParseError("missing \\end\\ marker", i + 1);
  return NgramModel(std::move(vocab), std::move(entries));
}

}  // namespace hmt
