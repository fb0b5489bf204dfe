#pragma once

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hmt/ape.hpp"
#include "hmt/decoder.hpp"
#include "hmt/metrics.hpp"
#include "hmt/ngram_lm.hpp"
#include "hmt/phrases.hpp"
#include "hmt/textprep.hpp"

namespace hmt {

struct PipelinePaths {
  std::filesystem::path train_src;  // raw text, one sentence per line
  std::filesystem::path train_tgt;
  std::filesystem::path mono_tgt;   // optional extra LM text
  std::filesystem::path test_sgm;
  std::filesystem::path ref_sgm;    // optional, enables scoring of the hybrid output
  std::filesystem::path output_dir;
};

struct PipelineConfig {
  PipelinePaths paths;
  std::size_t smt_train_count = 762022;
  std::size_t ape_train_count = 200000;
  int lm_order = 7;
  std::size_t max_phrase_len = 7;
  int em_iterations = 5;
  DecoderConfig decoder;
  ape::TrainConfig train;
  std::size_t clean_max_len = 80;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

// Strict parse: unknown keys, wrong types and missing required paths raise
// ConfigError. Relative paths resolve against base_dir.
PipelineConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& file);
nlohmann::json config_to_json(const PipelineConfig& config);

// First smt_count pairs, then the next ape_count. Throws ConfigError when the
// corpus is too small.
std::pair<ParallelCorpus, ParallelCorpus> split_corpus(const ParallelCorpus& corpus, std::size_t smt_count,
                                                       std::size_t ape_count);

// Decodes every sentence; order preserved.
std::vector<Sentence> smt_translate(const std::vector<Sentence>& sentences, const PhraseTable& table,
                                    const NgramModel& lm, const DecoderConfig& config, unsigned workers = 1);

ape::ApeModel train_ape(const std::vector<Sentence>& smt_outputs, const std::vector<Sentence>& gold,
                        const ape::TrainConfig& config, std::vector<double>* loss_curve = nullptr);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Fixed artifact names inside the output directory.
namespace artifact {
inline constexpr const char* kCorpusSrc = "corpus.src";
inline constexpr const char* kCorpusTgt = "corpus.tgt";
inline constexpr const char* kSmtSrc = "smt.src";
inline constexpr const char* kSmtTgt = "smt.tgt";
inline constexpr const char* kApeSrc = "ape.src";
inline constexpr const char* kApeTgt = "ape.tgt";
inline constexpr const char* kMono = "mono.tgt";
inline constexpr const char* kTruecaseSrc = "truecase.src";
inline constexpr const char* kTruecaseTgt = "truecase.tgt";
inline constexpr const char* kLm = "lm.arpa";
inline constexpr const char* kLexF2E = "lex.f2e";
inline constexpr const char* kLexE2F = "lex.e2f";
inline constexpr const char* kAlignFwd = "align.fwd";
inline constexpr const char* kAlignRev = "align.rev";
inline constexpr const char* kAlignGdf = "align.gdf";
inline constexpr const char* kPhraseTable = "phrase-table.txt";
inline constexpr const char* kSmtOutput = "smt-output.tgt";
inline constexpr const char* kSmtTrace = "smt-trace.tsv";
inline constexpr const char* kApeModel = "ape.model";
inline constexpr const char* kHybridSgm = "hybrid-output.sgm";
inline constexpr const char* kReport = "report.json";
}  // namespace artifact

// Runs the stages against one output directory. Each stage reads the
// artifacts of earlier stages from disk, so stages can run in separate
// processes. report.json is rewritten after every stage.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  void set_trace(bool on) { trace_ = on; }

  void preprocess();
  CorpusStats stats();
  void train_lm();
  void align();
  void extract_phrases();
  void train_smt();
  void smt_translate();
  // Translates raw text lines with the SMT system alone; output detruecased.
  std::string smt_translate_text(std::string_view raw_text);
  void train_ape();
  void hybrid_translate();
  // Scores the hybrid output against paths.ref_sgm.
  MetricScores evaluate();
  void run_all();

  const nlohmann::json& report() const { return report_; }

 private:
  std::filesystem::path out(const char* name) const { return config_.paths.output_dir / name; }
  std::string require(const char* name, const char* stage) const;
  template <typename Fn>
  void run_stage(const char* name, Fn&& fn);
  void save_report() const;

  PipelineConfig config_;
  bool trace_ = false;
  nlohmann::json report_;
};

}  // namespace hmt
