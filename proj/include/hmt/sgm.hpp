#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hmt {

// NIST/WMT SGML test-set container (the subset with set/doc/seg elements).
struct SgmDocument {
  enum class Kind { Source, Reference, Test };

  struct Segment {
    long id = 0;
    std::string text;

    bool operator==(const Segment&) const = default;
  };

  struct Doc {
    std::string doc_id;
    std::vector<Segment> segs;

    bool operator==(const Doc&) const = default;
  };

  Kind kind = Kind::Source;
  std::string set_id;
  std::string src_lang;
  std::string trg_lang;
  std::vector<Doc> docs;

  bool operator==(const SgmDocument&) const = default;
};

// Throws ParseError (with line number) on malformed nesting, duplicate or
// non-integer seg ids.
SgmDocument parse_sgm(std::string_view bytes);
std::string emit_sgm(const SgmDocument& doc);

// Text content escapes & < >; attribute values additionally escape ".
std::string sgm_escape(std::string_view text, bool attribute = false);
std::string sgm_unescape(std::string_view text);

}  // namespace hmt
