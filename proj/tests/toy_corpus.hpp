#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hmt/pipeline.hpp"
#include "hmt/sgm.hpp"

namespace hmt::toy {

inline const std::vector<std::string>& toy_words() {
  static const std::vector<std::string> words = {
      "alpha", "bravo", "delta", "echo",  "golf",  "hotel", "india", "kilo",  "lima",  "mike",
      "oscar", "papa",  "romeo", "sierra", "tango", "victor", "whisky", "yankee", "zulu", "nova"};
  return words;
}

// Copy language: target equals source. Sentences start capitalized and every
// word also occurs lowercased mid-sentence, so truecasing round-trips.
inline std::vector<std::string> copy_sentences(std::size_t count, std::mt19937& rng, std::size_t max_words = 6) {
  const auto& words = toy_words();
  std::vector<std::string> out;
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t n = 2 + rng() % (max_words - 1);
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
      std::string w = words[rng() % words.size()];
      if (i == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
      line += (i ? " " : "") + w;
    }
    out.push_back(line + " .");
  }
  return out;
}

inline std::string lines_text(const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  return text;
}

struct ToySetup {
  std::filesystem::path config;
  std::filesystem::path test_sgm;
  std::filesystem::path ref_sgm;
};

// Writes a copy-language corpus, SGM test/reference sets and a small config.
// With test_from_ape the test segments are drawn from the post-editing split.
inline ToySetup write_copy_setup(const std::filesystem::path& dir, std::size_t smt_pairs, std::size_t ape_pairs,
                                 int epochs, std::size_t d = 16, std::uint64_t seed = 1, bool test_from_ape = false) {
  std::filesystem::create_directories(dir);
  std::mt19937 rng(static_cast<unsigned>(seed));
  const auto train = copy_sentences(smt_pairs + ape_pairs, rng);
  write_file(dir / "train.src", lines_text(train));
  write_file(dir / "train.tgt", lines_text(train));
  write_file(dir / "mono.tgt", lines_text(copy_sentences(20, rng)));

  SgmDocument test;
  test.set_id = "toy";
  test.src_lang = "xx";
  test.trg_lang = "xx";
  long id = 1;
  for (int d = 0; d < 2; ++d) {
    SgmDocument::Doc doc{"doc" + std::to_string(d + 1), {}};
    auto segs = copy_sentences(5, rng);
    if (test_from_ape) {
      for (auto& s : segs) s = train[smt_pairs + rng() % ape_pairs];
    }
    for (const auto& s : segs) doc.segs.push_back({id++ * 3, s});
    test.docs.push_back(doc);
  }
  test.docs[1].segs.push_back({id++ * 3, ""});
  SgmDocument ref = test;
  ref.kind = SgmDocument::Kind::Reference;
  write_file(dir / "test.sgm", emit_sgm(test));
  write_file(dir / "ref.sgm", emit_sgm(ref));

  const std::string config = R"({
  "paths": {"train_src": "train.src", "train_tgt": "train.tgt", "mono_tgt": "mono.tgt",
            "test_sgm": "test.sgm", "ref_sgm": "ref.sgm", "output_dir": "out"},
  "smt_train_count": )" + std::to_string(smt_pairs) +
                             R"(,
  "ape_train_count": )" + std::to_string(ape_pairs) +
                             R"(,
  "lm_order": 3,
  "max_phrase_len": 3,
  "em_iterations": 5,
  "decoder": {"stack_size": 20, "distortion_limit": 3},
  "train": {"d": )" + std::to_string(d) + R"(, "epochs": )" + std::to_string(epochs) +
                             R"(, "batch_size": 16, "learning_rate": 0.005},
  "seed": )" + std::to_string(seed) + R"(
}
)";
  write_file(dir / "config.json", config);
  return {dir / "config.json", dir / "test.sgm", dir / "ref.sgm"};
}

}  // namespace hmt::toy
