#include "hmt/textprep.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cstdint>
#include <unordered_set>

#include "hmt/error.hpp"

namespace hmt {

namespace {

enum class CharClass { Space, Word, Punct };

CharClass classify(UChar32 c) {
  if (u_isUWhiteSpace(c) || u_isspace(c)) return CharClass::Space;
  if (u_isalnum(c)) return CharClass::Word;
  // Combining marks stay attached to the letters they modify.
  const auto mask = U_GET_GC_MASK(c);
  if (mask & U_GC_M_MASK) return CharClass::Word;
  return CharClass::Punct;
}

// Walks a UTF-8 string code point by code point.
template <typename Fn>
void for_each_code_point(std::string_view text, Fn&& fn) {
  const auto* s = reinterpret_cast<const std::uint8_t*>(text.data());
  const auto length = static_cast<std::int32_t>(text.size());
  std::int32_t i = 0;
  while (i < length) {
    const std::int32_t start = i;
    UChar32 c = 0;
    U8_NEXT(s, i, length, c);
    if (c < 0) {
      throw EncodingError("invalid UTF-8 sequence at byte offset " + std::to_string(start));
    }
    fn(c, start, i);
  }
}

void append_utf8(std::string& out, UChar32 c) {
  std::uint8_t buf[U8_MAX_LENGTH];
  std::int32_t n = 0;
  UBool error = false;
  U8_APPEND(buf, n, U8_MAX_LENGTH, c, error);
  if (error) throw EncodingError("code point cannot be encoded as UTF-8");
  out.append(reinterpret_cast<const char*>(buf), static_cast<std::size_t>(n));
}

// counts is ordered, so the first form seen per key is the lexicographically
// smallest and only a strictly larger count displaces it.
void select_best_forms(TruecaseModel& model) {
  model.best_form.clear();
  std::map<std::string, std::size_t> best_count;
  for (const auto& [form, count] : model.counts) {
    const auto key = to_lower(form);
    auto it = best_count.find(key);
    if (it == best_count.end() || count > it->second) {
      best_count[key] = count;
      model.best_form[key] = form;
    }
  }
}

}  // namespace

Sentence tokenize(std::string_view text) {
  Sentence tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(std::move(word));
      word.clear();
    }
  };
  for_each_code_point(text, [&](UChar32 c, std::int32_t begin, std::int32_t end) {
    const auto piece = text.substr(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin));
    switch (classify(c)) {
      case CharClass::Space:
        flush();
        break;
      case CharClass::Word:
        word.append(piece);
        break;
      case CharClass::Punct:
        flush();
        tokens.emplace_back(piece);
        break;
    }
  });
  flush();
  return tokens;
}

std::string join_tokens(const Sentence& sentence) {
  std::string out;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (i) out += ' ';
    out += sentence[i];
  }
  return out;
}

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for_each_code_point(text, [&](UChar32 c, std::int32_t, std::int32_t) { append_utf8(out, u_tolower(c)); });
  return out;
}

std::string to_upper_first(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool first = true;
  for_each_code_point(text, [&](UChar32 c, std::int32_t, std::int32_t) {
    append_utf8(out, first ? u_toupper(c) : c);
    first = false;
  });
  return out;
}

bool is_acronym(std::string_view token) {
  std::size_t code_points = 0;
  bool has_letter = false;
  bool all_upper = true;
  for_each_code_point(token, [&](UChar32 c, std::int32_t, std::int32_t) {
    ++code_points;
    if (u_isalpha(c)) {
      has_letter = true;
      if (!u_isupper(c)) all_upper = false;
    }
  });
  return code_points > 1 && has_letter && all_upper;
}

bool starts_with_letter(std::string_view token) {
  if (token.empty()) return false;
  bool result = false;
  bool seen = false;
  for_each_code_point(token, [&](UChar32 c, std::int32_t, std::int32_t) {
    if (!seen) result = u_isalpha(c);
    seen = true;
  });
  return result;
}

TruecaseModel train_truecaser(const std::vector<Sentence>& corpus) {
  TruecaseModel model;
  for (const auto& sentence : corpus) {
    for (std::size_t i = 1; i < sentence.size(); ++i) ++model.counts[sentence[i]];
  }
  select_best_forms(model);
  return model;
}

Sentence truecase(const Sentence& sentence, const TruecaseModel& model) {
  Sentence out = sentence;
  if (out.empty()) return out;
  auto& first = out.front();
  const auto key = to_lower(first);
  if (auto it = model.best_form.find(key); it != model.best_form.end()) {
    first = it->second;
  } else if (!is_acronym(first)) {
    first = key;
  }
  return out;
}

Sentence detruecase(const Sentence& sentence) {
  Sentence out = sentence;
  for (auto& token : out) {
    if (starts_with_letter(token)) {
      token = to_upper_first(token);
      break;
    }
  }
  return out;
}

std::string write_truecase_model(const TruecaseModel& model) {
  std::string out;
  for (const auto& [form, count] : model.counts) {
    out += form;
    out += ' ';
    out += std::to_string(count);
    out += '\n';
  }
  return out;
}

TruecaseModel read_truecase_model(std::string_view text) {
  std::size_t line_no = 0;
  TruecaseModel model;
  for (const auto& fields : parse_plain_corpus(text)) {
    ++line_no;
    if (fields.empty()) continue;
    if (fields.size() != 2) throw ParseError("expected '<form> <count>'", line_no);
    std::size_t count = 0;
    try {
      count = std::stoul(fields[1]);
    } catch (const std::exception&) {
      throw ParseError("bad count '" + fields[1] + "'", line_no);
    }
    model.counts[fields[0]] = count;
  }
  select_best_forms(model);
  return model;
}

ParallelCorpus clean_corpus(const ParallelCorpus& corpus, std::size_t max_len) {
  if (max_len < 1) throw ParameterError("clean_corpus: max_len must be >= 1");
  ParallelCorpus out;
  auto ok = [max_len](const Sentence& s) { return !s.empty() && s.size() <= max_len; };
  std::copy_if(corpus.begin(), corpus.end(), std::back_inserter(out),
               [&](const SentencePair& p) { return ok(p.source) && ok(p.target); });
  return out;
}

CorpusStats corpus_stats(const ParallelCorpus& corpus) {
  CorpusStats stats;
  std::unordered_set<std::string> src_vocab;
  std::unordered_set<std::string> tgt_vocab;
  for (const auto& pair : corpus) {
    stats.source_tokens += pair.source.size();
    stats.target_tokens += pair.target.size();
    src_vocab.insert(pair.source.begin(), pair.source.end());
    tgt_vocab.insert(pair.target.begin(), pair.target.end());
  }
  stats.source_sentences = stats.target_sentences = corpus.size();
  stats.source_vocab = src_vocab.size();
  stats.target_vocab = tgt_vocab.size();
  return stats;
}

std::vector<Sentence> parse_plain_corpus(std::string_view text) {
  std::vector<Sentence> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    Sentence tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      if (j > i) tokens.emplace_back(line.substr(i, j - i));
      i = j;
    }
    out.push_back(std::move(tokens));
    pos = end + 1;
  }
  return out;
}

std::string write_plain_corpus(const std::vector<Sentence>& sentences) {
  std::string out;
  for (const auto& s : sentences) {
    out += join_tokens(s);
    out += '\n';
  }
  return out;
}

ParallelCorpus zip_corpus(std::vector<Sentence> source, std::vector<Sentence> target) {
  if (source.size() != target.size()) {
    throw ParameterError("parallel corpus sides differ in length: " + std::to_string(source.size()) + " vs " +
                         std::to_string(target.size()));
  }
  ParallelCorpus corpus(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    corpus[i].source = std::move(source[i]);
    corpus[i].target = std::move(target[i]);
  }
  return corpus;
}

}  // namespace hmt
