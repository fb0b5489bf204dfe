#include "hmt/align.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "hmt/error.hpp"
#include "hmt/parallel.hpp"

namespace hmt {

LexicalTable::LexicalTable(double epsilon) : epsilon_(epsilon) { add_source(kNullWord); }

std::uint32_t LexicalTable::add_source(std::string_view word) {
  auto [it, inserted] = src_ids_.try_emplace(std::string(word), static_cast<std::uint32_t>(src_words_.size()));
  if (inserted) src_words_.emplace_back(word);
  return it->second;
}

std::uint32_t LexicalTable::add_target(std::string_view word) {
  auto [it, inserted] = tgt_ids_.try_emplace(std::string(word), static_cast<std::uint32_t>(tgt_words_.size()));
  if (inserted) tgt_words_.emplace_back(word);
  return it->second;
}

std::optional<std::uint32_t> LexicalTable::source_id(std::string_view word) const {
  auto it = src_ids_.find(std::string(word));
  if (it == src_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> LexicalTable::target_id(std::string_view word) const {
  auto it = tgt_ids_.find(std::string(word));
  if (it == tgt_ids_.end()) return std::nullopt;
  return it->second;
}

double LexicalTable::prob(std::uint32_t src, std::uint32_t tgt) const {
  auto it = t_.find(key(src, tgt));
  return it == t_.end() ? epsilon_ : it->second;
}

double LexicalTable::prob(std::string_view src, std::string_view tgt) const {
  auto f = source_id(src);
  auto e = target_id(tgt);
  if (!f || !e) return epsilon_;
  return prob(*f, *e);
}

void LexicalTable::set(std::uint32_t src, std::uint32_t tgt, double p) { t_[key(src, tgt)] = p; }

std::map<std::string, double> LexicalTable::row_sums() const {
  std::vector<double> sums(src_words_.size(), 0.0);
  for (const auto& [k, p] : t_) sums[k >> 32] += p;
  std::map<std::string, double> out;
  for (std::size_t f = 0; f < sums.size(); ++f) {
    if (sums[f] > 0.0) out[src_words_[f]] = sums[f];
  }
  return out;
}

std::vector<std::tuple<std::string, std::string, double>> LexicalTable::entries() const {
  std::vector<std::tuple<std::string, std::string, double>> out;
  out.reserve(t_.size());
  for (const auto& [k, p] : t_) {
    out.emplace_back(src_words_[k >> 32], tgt_words_[k & 0xffffffffu], p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Corpus indexed once against the table's word ids; NULL is prepended to
// every source sentence.
class Ibm1Trainer {
 public:
  static constexpr std::size_t kShard = 256;

  Ibm1Trainer(const ParallelCorpus& corpus, LexicalTable& table) : table_(table) {
    src_.reserve(corpus.size());
    tgt_.reserve(corpus.size());
    for (const auto& pair : corpus) {
      std::vector<std::uint32_t> f{LexicalTable::kNull};
      for (const auto& w : pair.source) f.push_back(table.add_source(w));
      std::vector<std::uint32_t> e;
      for (const auto& w : pair.target) e.push_back(table.add_target(w));
      src_.push_back(std::move(f));
      tgt_.push_back(std::move(e));
    }
  }

  void initialize() {
    std::vector<std::set<std::uint32_t>> cooc(table_.source_size());
    for (std::size_t s = 0; s < src_.size(); ++s) {
      for (auto f : src_[s]) cooc[f].insert(tgt_[s].begin(), tgt_[s].end());
    }
    table_.t_.clear();
    for (std::uint32_t f = 0; f < cooc.size(); ++f) {
      for (auto e : cooc[f]) table_.set(f, e, 1.0 / static_cast<double>(cooc[f].size()));
    }
  }

  void iterate(unsigned workers) {
    const std::size_t shards = (src_.size() + kShard - 1) / kShard;
    std::vector<std::unordered_map<std::uint64_t, double>> counts(shards);
    parallel_for(shards, workers, [&](std::size_t shard) {
      auto& local = counts[shard];
      const std::size_t end = std::min(src_.size(), (shard + 1) * kShard);
      std::vector<double> row;
      for (std::size_t s = shard * kShard; s < end; ++s) {
        const auto& f = src_[s];
        row.resize(f.size());
        for (auto e : tgt_[s]) {
          double denom = 0.0;
          for (std::size_t i = 0; i < f.size(); ++i) {
            row[i] = table_.prob(f[i], e);
            denom += row[i];
          }
          for (std::size_t i = 0; i < f.size(); ++i) local[LexicalTable::key(f[i], e)] += row[i] / denom;
        }
      }
    });

    // Merge shards in order; keys are visited in sorted order so the
    // floating-point sums are reproducible.
    std::unordered_map<std::uint64_t, double> merged;
    for (auto& local : counts) {
      std::vector<std::pair<std::uint64_t, double>> sorted(local.begin(), local.end());
      std::sort(sorted.begin(), sorted.end());
      for (const auto& [k, c] : sorted) merged[k] += c;
    }
    std::vector<std::pair<std::uint64_t, double>> sorted(merged.begin(), merged.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> totals(table_.source_size(), 0.0);
    for (const auto& [k, c] : sorted) totals[k >> 32] += c;
    table_.t_.clear();
    for (const auto& [k, c] : sorted) table_.t_[k] = c / totals[k >> 32];
  }

 private:
  LexicalTable& table_;
  std::vector<std::vector<std::uint32_t>> src_;
  std::vector<std::vector<std::uint32_t>> tgt_;
};

LexicalTable ibm1_train(const ParallelCorpus& corpus, int iterations, double epsilon,
                        std::vector<double>* loglik_curve, unsigned workers) {
  if (corpus.empty()) throw ParameterError("ibm1_train: corpus is empty");
  if (iterations < 1) throw ParameterError("ibm1_train: iterations must be >= 1");
  LexicalTable table(epsilon);
  Ibm1Trainer trainer(corpus, table);
  trainer.initialize();
  for (int it = 0; it < iterations; ++it) {
    trainer.iterate(workers);
    if (loglik_curve) loglik_curve->push_back(corpus_loglik(table, corpus));
  }
  return table;
}

double corpus_loglik(const LexicalTable& table, const ParallelCorpus& corpus) {
  double total = 0.0;
  std::vector<std::optional<std::uint32_t>> f;
  for (const auto& pair : corpus) {
    f.assign(1, LexicalTable::kNull);
    for (const auto& w : pair.source) f.push_back(table.source_id(w));
    const double norm = 1.0 / static_cast<double>(f.size());
    for (const auto& word : pair.target) {
      const auto e = table.target_id(word);
      double sum = 0.0;
      for (const auto& fi : f) sum += (fi && e) ? table.prob(*fi, *e) : table.epsilon();
      total += std::log(std::max(table.epsilon(), norm * sum));
    }
  }
  return total;
}

AlignmentMatrix viterbi_align(const LexicalTable& table, const SentencePair& pair) {
  AlignmentMatrix a{pair.source.size(), pair.target.size(), {}};
  for (std::size_t j = 0; j < pair.target.size(); ++j) {
    double best = table.prob(LexicalTable::kNullWord, pair.target[j]);
    std::optional<std::size_t> best_i;
    for (std::size_t i = 0; i < pair.source.size(); ++i) {
      const double p = table.prob(pair.source[i], pair.target[j]);
      if (p > best) {
        best = p;
        best_i = i;
      }
    }
    if (best_i) a.links.emplace(*best_i, j);
  }
  return a;
}

AlignmentMatrix transpose(const AlignmentMatrix& a) {
  AlignmentMatrix t{a.tgt_len, a.src_len, {}};
  for (const auto& [i, j] : a.links) t.links.emplace(j, i);
  return t;
}

AlignmentMatrix grow_diag_final(const AlignmentMatrix& forward, const AlignmentMatrix& reverse) {
  if (forward.src_len != reverse.src_len || forward.tgt_len != reverse.tgt_len) {
    throw ParameterError("grow_diag_final: alignment dimensions differ");
  }
  const std::size_t n = forward.src_len;
  const std::size_t m = forward.tgt_len;
  AlignmentMatrix result{n, m, {}};
  std::set<std::pair<std::size_t, std::size_t>> united = forward.links;
  united.insert(reverse.links.begin(), reverse.links.end());
  std::set_intersection(forward.links.begin(), forward.links.end(), reverse.links.begin(), reverse.links.end(),
                        std::inserter(result.links, result.links.end()));

  std::vector<bool> src_aligned(n, false);
  std::vector<bool> tgt_aligned(m, false);
  for (const auto& [i, j] : result.links) {
    src_aligned[i] = true;
    tgt_aligned[j] = true;
  }
  auto add = [&](std::size_t i, std::size_t j) {
    result.links.emplace(i, j);
    src_aligned[i] = true;
    tgt_aligned[j] = true;
  };

  static constexpr int kNeighbors[8][2] = {{-1, 0}, {0, -1}, {1, 0}, {0, 1}, {-1, -1}, {-1, 1}, {1, -1}, {1, 1}};
  for (bool grew = true; grew;) {
    grew = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (!result.contains(i, j)) continue;
        for (const auto& d : kNeighbors) {
          const auto ni = static_cast<std::ptrdiff_t>(i) + d[0];
          const auto nj = static_cast<std::ptrdiff_t>(j) + d[1];
          if (ni < 0 || nj < 0 || ni >= static_cast<std::ptrdiff_t>(n) || nj >= static_cast<std::ptrdiff_t>(m)) continue;
          const auto ui = static_cast<std::size_t>(ni);
          const auto uj = static_cast<std::size_t>(nj);
          if ((!src_aligned[ui] || !tgt_aligned[uj]) && united.count({ui, uj}) && !result.contains(ui, uj)) {
            add(ui, uj);
            grew = true;
          }
        }
      }
    }
  }
  for (const auto& [i, j] : united) {
    if (!src_aligned[i] && !tgt_aligned[j]) add(i, j);
  }
  return result;
}

std::string format_alignment(const AlignmentMatrix& a) {
  std::string out;
  for (const auto& [i, j] : a.links) {
    if (!out.empty()) out += ' ';
    out += std::to_string(i) + "-" + std::to_string(j);
  }
  return out;
}

AlignmentMatrix parse_alignment(std::string_view line, std::size_t src_len, std::size_t tgt_len, std::size_t line_no) {
  AlignmentMatrix a{src_len, tgt_len, {}};
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    if (pos >= line.size()) break;
    auto end = line.find(' ', pos);
    if (end == std::string_view::npos) end = line.size();
    const auto item = line.substr(pos, end - pos);
    const auto dash = item.find('-');
    std::size_t i = 0;
    std::size_t j = 0;
    if (dash == std::string_view::npos) throw ParseError("malformed link '" + std::string(item) + "'", line_no);
    auto r1 = std::from_chars(item.data(), item.data() + dash, i);
    auto r2 = std::from_chars(item.data() + dash + 1, item.data() + item.size(), j);
    if (r1.ec != std::errc() || r1.ptr != item.data() + dash || r2.ec != std::errc() ||
        r2.ptr != item.data() + item.size()) {
      throw ParseError("malformed link '" + std::string(item) + "'", line_no);
    }
    if (i >= src_len || j >= tgt_len) throw ParseError("link " + std::string(item) + " out of bounds", line_no);
    a.links.emplace(i, j);
    pos = end;
  }
  return a;
}

std::string write_lexical_table(const LexicalTable& table) {
  std::string out;
  char buf[64];
  for (const auto& [f, e, p] : table.entries()) {
    std::snprintf(buf, sizeof buf, "%.9g", p);
    out += f + " " + e + " " + buf + "\n";
  }
  return out;
}

LexicalTable read_lexical_table(std::string_view text) {
  LexicalTable table;
  std::size_t line_no = 0;
  for (const auto& fields : parse_plain_corpus(text)) {
    ++line_no;
    if (fields.empty()) continue;
    if (fields.size() != 3) throw ParseError("expected 'src tgt prob'", line_no);
    char* end = nullptr;
    const double p = std::strtod(fields[2].c_str(), &end);
    if (end != fields[2].c_str() + fields[2].size()) throw ParseError("bad probability '" + fields[2] + "'", line_no);
    table.set(table.add_source(fields[0]), table.add_target(fields[1]), p);
  }
  return table;
}

}  // namespace hmt
