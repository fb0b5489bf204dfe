#include "hmt/sgm.hpp"

#include <cctype>
#include <charconv>
#include <map>
#include <set>

#include "hmt/error.hpp"

namespace hmt {

namespace {

struct Tag {
  std::string name;
  bool closing = false;
  std::map<std::string, std::string> attrs;
  std::size_t line = 0;
};

const char* kind_name(SgmDocument::Kind kind) {
  switch (kind) {
    case SgmDocument::Kind::Source:
      return "srcset";
    case SgmDocument::Kind::Reference:
      return "refset";
    case SgmDocument::Kind::Test:
      return "tstset";
  }
  return "srcset";
}

class SgmReader {
 public:
  explicit SgmReader(std::string_view in) : in_(in) {}

  SgmDocument read() {
    SgmDocument doc;
    skip_space();
    Tag set = expect_open();
    if (set.name == "srcset") {
      doc.kind = SgmDocument::Kind::Source;
    } else if (set.name == "refset") {
      doc.kind = SgmDocument::Kind::Reference;
    } else if (set.name == "tstset") {
      doc.kind = SgmDocument::Kind::Test;
    } else {
      throw ParseError("expected srcset, refset or tstset, found <" + set.name + ">", set.line);
    }
    doc.set_id = attr(set, "setid");
    doc.src_lang = attr(set, "srclang");
    doc.trg_lang = attr(set, "trglang", /*required=*/false);

    for (;;) {
      skip_space();
      Tag tag = next_tag();
      if (tag.closing) {
        if (tag.name != set.name) throw ParseError("mismatched </" + tag.name + "> inside <" + set.name + ">", tag.line);
        break;
      }
      if (tag.name != "doc") throw ParseError("unexpected <" + tag.name + "> inside <" + set.name + ">", tag.line);
      doc.docs.push_back(read_doc(tag));
    }
    skip_space();
    if (pos_ != in_.size()) throw ParseError("trailing content after </" + set.name + ">", line_);
    return doc;
  }

 private:
  SgmDocument::Doc read_doc(const Tag& open) {
    SgmDocument::Doc doc;
    doc.doc_id = attr(open, "docid");
    std::set<long> ids;
    int paragraph_depth = 0;
    for (;;) {
      skip_space();
      Tag tag = next_tag();
      if (tag.closing) {
        if (tag.name == "p" && paragraph_depth > 0) {
          --paragraph_depth;
          continue;
        }
        if (tag.name != "doc" || paragraph_depth != 0) {
          throw ParseError("mismatched </" + tag.name + "> inside <doc>", tag.line);
        }
        return doc;
      }
      if (tag.name == "p") {
        ++paragraph_depth;
        continue;
      }
      if (tag.name != "seg") throw ParseError("unexpected <" + tag.name + "> inside <doc>", tag.line);
      SgmDocument::Segment seg;
      seg.id = parse_id(attr(tag, "id"), tag.line);
      if (!ids.insert(seg.id).second) {
        throw ParseError("duplicate seg id " + std::to_string(seg.id) + " in doc '" + doc.doc_id + "'", tag.line);
      }
      seg.text = read_seg_text();
      doc.segs.push_back(std::move(seg));
    }
  }

  std::string read_seg_text() {
    const std::size_t start = pos_;
    const std::size_t start_line = line_;
    const auto lt = in_.find('<', pos_);
    if (lt == std::string_view::npos) throw ParseError("unterminated <seg>", start_line);
    advance_to(lt);
    Tag close = next_tag();
    if (!close.closing || close.name != "seg") {
      throw ParseError("expected </seg>, found <" + std::string(close.closing ? "/" : "") + close.name + ">",
                       close.line);
    }
    return sgm_unescape(in_.substr(start, lt - start));
  }

  static long parse_id(const std::string& text, std::size_t line) {
    long value = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc() || ptr != last) throw ParseError("non-integer seg id '" + text + "'", line);
    if (value <= 0) throw ParseError("seg id must be positive, got " + text, line);
    return value;
  }

  static std::string attr(const Tag& tag, const std::string& name, bool required = true) {
    auto it = tag.attrs.find(name);
    if (it == tag.attrs.end()) {
      if (required) throw ParseError("<" + tag.name + "> is missing attribute " + name, tag.line);
      return {};
    }
    return it->second;
  }

  Tag expect_open() {
    Tag tag = next_tag();
    if (tag.closing) throw ParseError("unexpected closing tag </" + tag.name + ">", tag.line);
    return tag;
  }

  Tag next_tag() {
    if (pos_ >= in_.size()) throw ParseError("unexpected end of input", line_);
    if (in_[pos_] != '<') throw ParseError("unexpected text outside <seg>", line_);
    Tag tag;
    tag.line = line_;
    bump();
    if (peek() == '/') {
      tag.closing = true;
      bump();
    }
    while (pos_ < in_.size() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')) {
      tag.name += static_cast<char>(std::tolower(static_cast<unsigned char>(peek())));
      bump();
    }
    if (tag.name.empty()) throw ParseError("missing tag name", tag.line);
    for (;;) {
      skip_space();
      if (pos_ >= in_.size()) throw ParseError("unterminated tag <" + tag.name + ">", tag.line);
      if (peek() == '>') {
        bump();
        return tag;
      }
      if (tag.closing) throw ParseError("attributes on closing tag </" + tag.name + ">", line_);
      std::string key;
      while (pos_ < in_.size() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) {
        key += static_cast<char>(std::tolower(static_cast<unsigned char>(peek())));
        bump();
      }
      if (key.empty()) throw ParseError("malformed attribute in <" + tag.name + ">", line_);
      skip_space();
      if (peek() != '=') throw ParseError("expected '=' after attribute " + key, line_);
      bump();
      skip_space();
      if (peek() != '"') throw ParseError("attribute " + key + " must be double-quoted", line_);
      bump();
      const auto close = in_.find('"', pos_);
      if (close == std::string_view::npos) throw ParseError("unterminated attribute value", line_);
      const auto raw = in_.substr(pos_, close - pos_);
      advance_to(close + 1);
      tag.attrs[key] = sgm_unescape(raw);
    }
  }

  char peek() const { return pos_ < in_.size() ? in_[pos_] : '\0'; }

  void bump() {
    if (in_[pos_] == '\n') ++line_;
    ++pos_;
  }

  void advance_to(std::size_t target) {
    while (pos_ < target) bump();
  }

  void skip_space() {
    while (pos_ < in_.size() && std::isspace(static_cast<unsigned char>(in_[pos_]))) bump();
  }

  std::string_view in_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace

std::string sgm_escape(std::string_view text, bool attribute) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += attribute ? "&quot;" : "\"";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string sgm_unescape(std::string_view text) {
  static constexpr std::pair<std::string_view, char> kEntities[] = {
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}};
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    bool replaced = false;
    if (text[i] == '&') {
      for (const auto& [entity, ch] : kEntities) {
        if (text.substr(i, entity.size()) == entity) {
          out += ch;
          i += entity.size();
          replaced = true;
          break;
        }
      }
    }
    if (!replaced) out += text[i++];
  }
  return out;
}

SgmDocument parse_sgm(std::string_view bytes) { return SgmReader(bytes).read(); }

std::string emit_sgm(const SgmDocument& doc) {
  const std::string set = kind_name(doc.kind);
  std::string out = "<" + set + " setid=\"" + sgm_escape(doc.set_id, true) + "\" srclang=\"" + sgm_escape(doc.src_lang, true) +
                    "\" trglang=\"" + sgm_escape(doc.trg_lang, true) + "\">\n";
  for (const auto& d : doc.docs) {
    out += "<doc docid=\"" + sgm_escape(d.doc_id, true) + "\">\n";
    for (const auto& seg : d.segs) {
      out += "<seg id=\"" + std::to_string(seg.id) + "\">" + sgm_escape(seg.text) + "</seg>\n";
    }
    out += "</doc>\n";
  }
  out += "</" + set + ">\n";
  return out;
}

}  // namespace hmt
