#include "hmt/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>

#include "hmt/align.hpp"
#include "hmt/error.hpp"
#include "hmt/parallel.hpp"
#include "hmt/sgm.hpp"

namespace hmt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_key(const json& obj, const char* key, T& target, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  const std::string name = where + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ConfigError(name + ": expected a boolean");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!it->is_number()) throw ConfigError(name + ": expected a number");
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!it->is_number_unsigned()) throw ConfigError(name + ": expected a non-negative integer");
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) throw ConfigError(name + ": expected an integer");
  } else {
    if (!it->is_string()) throw ConfigError(name + ": expected a string");
  }
  target = it->get<T>();
}

void read_path(const json& obj, const char* key, fs::path& target, const fs::path& base, bool required) {
  std::string value;
  read_key(obj, key, value, "paths");
  if (value.empty()) {
    if (required) throw ConfigError(std::string("paths.") + key + " is required");
    return;
  }
  fs::path p(value);
  target = p.is_absolute() || base.empty() ? p : base / p;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    pos = end + 1;
  }
  return lines;
}

std::vector<Sentence> tokenize_lines(std::string_view text) {
  std::vector<Sentence> out;
  for (const auto& line : split_lines(text)) out.push_back(tokenize(line));
  return out;
}

std::vector<Sentence> side(const ParallelCorpus& corpus, bool source) {
  std::vector<Sentence> out;
  out.reserve(corpus.size());
  for (const auto& pair : corpus) out.push_back(source ? pair.source : pair.target);
  return out;
}

std::vector<Sentence> truecase_all(const std::vector<Sentence>& text, const TruecaseModel& model) {
  std::vector<Sentence> out;
  out.reserve(text.size());
  for (const auto& s : text) out.push_back(truecase(s, model));
  return out;
}

json stats_json(const CorpusStats& s) {
  return {{"source_sentences", s.source_sentences}, {"target_sentences", s.target_sentences},
          {"source_tokens", s.source_tokens},       {"target_tokens", s.target_tokens},
          {"source_vocab", s.source_vocab},         {"target_vocab", s.target_vocab}};
}

const char* optimizer_name(ape::Optimizer o) { return o == ape::Optimizer::Sgd ? "sgd" : "adam"; }

std::vector<AlignmentMatrix> read_alignments(std::string_view text, const ParallelCorpus& corpus) {
  const auto lines = split_lines(text);
  if (lines.size() != corpus.size()) {
    throw PipelineError("alignment file has " + std::to_string(lines.size()) + " lines for " +
                        std::to_string(corpus.size()) + " sentence pairs");
  }
  std::vector<AlignmentMatrix> out;
  out.reserve(lines.size());
  for (std::size_t k = 0; k < lines.size(); ++k) {
    out.push_back(parse_alignment(lines[k], corpus[k].source.size(), corpus[k].target.size(), k + 1));
  }
  return out;
}

std::string write_alignments(const std::vector<AlignmentMatrix>& alignments) {
  std::string out;
  for (const auto& a : alignments) out += format_alignment(a) + "\n";
  return out;
}

}  // namespace

PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(doc,
             {"paths", "smt_train_count", "ape_train_count", "lm_order", "max_phrase_len", "em_iterations", "decoder",
              "train", "clean_max_len", "seed", "workers"},
             "config");
  PipelineConfig c;
  if (!doc.contains("paths")) throw ConfigError("config: missing 'paths'");
  const auto& paths = doc["paths"];
  check_keys(paths, {"train_src", "train_tgt", "mono_tgt", "test_sgm", "ref_sgm", "output_dir"}, "paths");
  read_path(paths, "train_src", c.paths.train_src, base_dir, true);
  read_path(paths, "train_tgt", c.paths.train_tgt, base_dir, true);
  read_path(paths, "mono_tgt", c.paths.mono_tgt, base_dir, false);
  read_path(paths, "test_sgm", c.paths.test_sgm, base_dir, true);
  read_path(paths, "ref_sgm", c.paths.ref_sgm, base_dir, false);
  read_path(paths, "output_dir", c.paths.output_dir, base_dir, false);

  read_key(doc, "smt_train_count", c.smt_train_count, "config");
  read_key(doc, "ape_train_count", c.ape_train_count, "config");
  read_key(doc, "lm_order", c.lm_order, "config");
  read_key(doc, "max_phrase_len", c.max_phrase_len, "config");
  read_key(doc, "em_iterations", c.em_iterations, "config");
  read_key(doc, "clean_max_len", c.clean_max_len, "config");
  read_key(doc, "seed", c.seed, "config");
  read_key(doc, "workers", c.workers, "config");

  if (auto it = doc.find("decoder"); it != doc.end()) {
    check_keys(*it, {"stack_size", "beam_threshold", "distortion_limit", "weights"}, "decoder");
    read_key(*it, "stack_size", c.decoder.stack_size, "decoder");
    read_key(*it, "beam_threshold", c.decoder.beam_threshold, "decoder");
    read_key(*it, "distortion_limit", c.decoder.distortion_limit, "decoder");
    if (auto w = it->find("weights"); w != it->end()) {
      check_keys(*w,
                 {"phi_tgt_given_src", "phi_src_given_tgt", "lex_tgt_given_src", "lex_src_given_tgt", "lm",
                  "distortion", "word_penalty"},
                 "decoder.weights");
      auto& weights = c.decoder.weights;
      read_key(*w, "phi_tgt_given_src", weights.phi_tgt_given_src, "decoder.weights");
      read_key(*w, "phi_src_given_tgt", weights.phi_src_given_tgt, "decoder.weights");
      read_key(*w, "lex_tgt_given_src", weights.lex_tgt_given_src, "decoder.weights");
      read_key(*w, "lex_src_given_tgt", weights.lex_src_given_tgt, "decoder.weights");
      read_key(*w, "lm", weights.lm, "decoder.weights");
      read_key(*w, "distortion", weights.distortion, "decoder.weights");
      read_key(*w, "word_penalty", weights.word_penalty, "decoder.weights");
    }
  }
  if (auto it = doc.find("train"); it != doc.end()) {
    check_keys(*it,
               {"d", "max_vocab", "epochs", "batch_size", "learning_rate", "optimizer", "grad_clip", "max_len"},
               "train");
    auto& t = c.train;
    read_key(*it, "d", t.d, "train");
    read_key(*it, "max_vocab", t.max_vocab, "train");
    read_key(*it, "epochs", t.epochs, "train");
    read_key(*it, "batch_size", t.batch_size, "train");
    read_key(*it, "learning_rate", t.learning_rate, "train");
    read_key(*it, "grad_clip", t.grad_clip, "train");
    read_key(*it, "max_len", t.max_len, "train");
    std::string optimizer = optimizer_name(t.optimizer);
    read_key(*it, "optimizer", optimizer, "train");
    if (optimizer == "adam") t.optimizer = ape::Optimizer::Adam;
    else if (optimizer == "sgd") t.optimizer = ape::Optimizer::Sgd;
    else throw ConfigError("train.optimizer: expected 'adam' or 'sgd'");
  }
  c.train.seed = c.seed;

  if (c.lm_order < 1) throw ConfigError("lm_order must be >= 1");
  if (c.max_phrase_len < 1) throw ConfigError("max_phrase_len must be >= 1");
  if (c.em_iterations < 1) throw ConfigError("em_iterations must be >= 1");
  if (c.clean_max_len < 1) throw ConfigError("clean_max_len must be >= 1");
  if (c.decoder.stack_size < 1) throw ConfigError("decoder.stack_size must be >= 1");
  if (c.decoder.distortion_limit < -1) throw ConfigError("decoder.distortion_limit must be >= -1");
  if (c.train.d < 1 || c.train.epochs < 1 || c.train.batch_size < 1 || c.train.max_len < 1) {
    throw ConfigError("train: d, epochs, batch_size and max_len must be positive");
  }
  return c;
}

PipelineConfig load_config(const fs::path& file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, file.parent_path());
}

json config_to_json(const PipelineConfig& c) {
  const auto& w = c.decoder.weights;
  const auto& t = c.train;
  json paths = {{"train_src", c.paths.train_src.string()},
                {"train_tgt", c.paths.train_tgt.string()},
                {"test_sgm", c.paths.test_sgm.string()},
                {"output_dir", c.paths.output_dir.string()}};
  if (!c.paths.mono_tgt.empty()) paths["mono_tgt"] = c.paths.mono_tgt.string();
  if (!c.paths.ref_sgm.empty()) paths["ref_sgm"] = c.paths.ref_sgm.string();
  return {{"paths", paths},
          {"smt_train_count", c.smt_train_count},
          {"ape_train_count", c.ape_train_count},
          {"lm_order", c.lm_order},
          {"max_phrase_len", c.max_phrase_len},
          {"em_iterations", c.em_iterations},
          {"decoder",
           {{"stack_size", c.decoder.stack_size},
            {"beam_threshold", c.decoder.beam_threshold},
            {"distortion_limit", c.decoder.distortion_limit},
            {"weights",
             {{"phi_tgt_given_src", w.phi_tgt_given_src},
              {"phi_src_given_tgt", w.phi_src_given_tgt},
              {"lex_tgt_given_src", w.lex_tgt_given_src},
              {"lex_src_given_tgt", w.lex_src_given_tgt},
              {"lm", w.lm},
              {"distortion", w.distortion},
              {"word_penalty", w.word_penalty}}}}},
          {"train",
           {{"d", t.d},
            {"max_vocab", t.max_vocab},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"learning_rate", t.learning_rate},
            {"optimizer", optimizer_name(t.optimizer)},
            {"grad_clip", t.grad_clip},
            {"max_len", t.max_len}}},
          {"clean_max_len", c.clean_max_len},
          {"seed", c.seed},
          {"workers", c.workers}};
}

std::pair<ParallelCorpus, ParallelCorpus> split_corpus(const ParallelCorpus& corpus, std::size_t smt_count,
                                                       std::size_t ape_count) {
  if (smt_count > corpus.size() || ape_count > corpus.size() - smt_count) {
    throw ConfigError("corpus has " + std::to_string(corpus.size()) + " pairs after cleaning, but smt_train_count " +
                      std::to_string(smt_count) + " + ape_train_count " + std::to_string(ape_count) + " needs " +
                      std::to_string(smt_count + ape_count));
  }
  const auto mid = corpus.begin() + static_cast<std::ptrdiff_t>(smt_count);
  return {ParallelCorpus(corpus.begin(), mid), ParallelCorpus(mid, mid + static_cast<std::ptrdiff_t>(ape_count))};
}

std::vector<Sentence> smt_translate(const std::vector<Sentence>& sentences, const PhraseTable& table,
                                    const NgramModel& lm, const DecoderConfig& config, unsigned workers) {
  std::vector<Sentence> out(sentences.size());
  parallel_for(sentences.size(), workers,
               [&](std::size_t k) { out[k] = decode(sentences[k], table, lm, config).tokens; });
  return out;
}

ape::ApeModel train_ape(const std::vector<Sentence>& smt_outputs, const std::vector<Sentence>& gold,
                        const ape::TrainConfig& config, std::vector<double>* loss_curve) {
  if (smt_outputs.size() != gold.size()) {
    throw PipelineError("train-ape: " + std::to_string(smt_outputs.size()) + " SMT outputs but " +
                        std::to_string(gold.size()) + " gold sentences");
  }
  if (smt_outputs.empty()) throw PipelineError("train-ape: no training pairs");
  std::vector<Sentence> both(smt_outputs);
  both.insert(both.end(), gold.begin(), gold.end());
  ape::ApeModel model;
  model.config = config;
  model.vocab = ape::ApeVocab::build(both, config.max_vocab);
  std::vector<ape::Example> examples;
  examples.reserve(gold.size());
  for (std::size_t k = 0; k < gold.size(); ++k) {
    examples.push_back(ape::make_example(model.vocab, smt_outputs[k], gold[k], config.max_len));
  }
  model.params = ape::init_params(config.d, model.vocab.size(), model.vocab.size(), config.seed);
  auto result = ape::train(model.params, examples, config);
  if (loss_curve) *loss_curve = result.loss_curve;
  return model;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  if (config_.paths.output_dir.empty()) throw ConfigError("no output directory (set paths.output_dir or --out)");
  const auto report_path = out(artifact::kReport);
  if (fs::exists(report_path)) {
    try {
      report_ = json::parse(read_file(report_path));
    } catch (const json::parse_error&) {
      report_ = json::object();
    }
  }
  if (!report_.is_object()) report_ = json::object();
}

std::string Pipeline::require(const char* name, const char* stage) const {
  const auto path = out(name);
  if (!fs::exists(path)) {
    throw PipelineError(std::string(stage) + ": missing artifact " + path.string());
  }
  return read_file(path);
}

template <typename Fn>
void Pipeline::run_stage(const char* name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  auto& stages = report_["stages"];
  if (!stages.is_array()) stages = json::array();
  bool seen = false;
  for (const auto& s : stages) seen = seen || s == name;
  if (!seen) stages.push_back(name);
  report_["timings"][name] = elapsed.count();
  save_report();
}

void Pipeline::save_report() const { write_file(out(artifact::kReport), report_.dump(2) + "\n"); }

void Pipeline::preprocess() {
  run_stage("preprocess", [&] {
    const auto& p = config_.paths;
    auto src = tokenize_lines(read_file(p.train_src));
    auto tgt = tokenize_lines(read_file(p.train_tgt));
    if (src.size() != tgt.size()) {
      throw PipelineError("preprocess: " + p.train_src.string() + " has " + std::to_string(src.size()) +
                          " lines but " + p.train_tgt.string() + " has " + std::to_string(tgt.size()));
    }
    const auto raw = zip_corpus(std::move(src), std::move(tgt));
    const auto cleaned = clean_corpus(raw, config_.clean_max_len);
    auto [smt, ape] = split_corpus(cleaned, config_.smt_train_count, config_.ape_train_count);

    std::vector<Sentence> mono;
    if (!p.mono_tgt.empty()) mono = tokenize_lines(read_file(p.mono_tgt));
    const auto src_side = side(cleaned, true);
    auto tgt_text = side(cleaned, false);
    tgt_text.insert(tgt_text.end(), mono.begin(), mono.end());
    const auto src_model = train_truecaser(src_side);
    const auto tgt_model = train_truecaser(tgt_text);

    write_file(out(artifact::kTruecaseSrc), write_truecase_model(src_model));
    write_file(out(artifact::kTruecaseTgt), write_truecase_model(tgt_model));
    write_file(out(artifact::kCorpusSrc), write_plain_corpus(truecase_all(src_side, src_model)));
    write_file(out(artifact::kCorpusTgt), write_plain_corpus(truecase_all(side(cleaned, false), tgt_model)));
    write_file(out(artifact::kSmtSrc), write_plain_corpus(truecase_all(side(smt, true), src_model)));
    write_file(out(artifact::kSmtTgt), write_plain_corpus(truecase_all(side(smt, false), tgt_model)));
    write_file(out(artifact::kApeSrc), write_plain_corpus(truecase_all(side(ape, true), src_model)));
    write_file(out(artifact::kApeTgt), write_plain_corpus(truecase_all(side(ape, false), tgt_model)));
    write_file(out(artifact::kMono), write_plain_corpus(truecase_all(mono, tgt_model)));

    report_["corpus"] = {{"raw", stats_json(corpus_stats(raw))},
                         {"cleaned", stats_json(corpus_stats(cleaned))},
                         {"removed_by_cleaning", raw.size() - cleaned.size()},
                         {"smt_pairs", smt.size()},
                         {"ape_pairs", ape.size()},
                         {"mono_sentences", mono.size()}};
  });
}

CorpusStats Pipeline::stats() {
  CorpusStats result;
  run_stage("stats", [&] {
    const auto corpus = zip_corpus(parse_plain_corpus(require(artifact::kCorpusSrc, "stats")),
                                   parse_plain_corpus(require(artifact::kCorpusTgt, "stats")));
    result = corpus_stats(corpus);
    report_["corpus_stats"] = stats_json(result);
  });
  return result;
}

void Pipeline::train_lm() {
  run_stage("train-lm", [&] {
    auto text = parse_plain_corpus(require(artifact::kSmtTgt, "train-lm"));
    const auto mono = parse_plain_corpus(require(artifact::kMono, "train-lm"));
    text.insert(text.end(), mono.begin(), mono.end());
    const auto vocab = Vocab::build(text);
    const auto model = estimate_kn(count_ngrams(text, vocab, config_.lm_order));
    write_file(out(artifact::kLm), write_arpa(model));

    json sizes = json::array();
    for (int n = 1; n <= model.order(); ++n) sizes.push_back(model.size(n));
    json lm = {{"order", model.order()}, {"ngrams", sizes}, {"discount_fallback_orders", model.fallback_orders}};
    const auto heldout = parse_plain_corpus(require(artifact::kApeTgt, "train-lm"));
    lm["heldout_perplexity"] = heldout.empty() ? json(nullptr) : json(perplexity(model, heldout));
    report_["lm"] = lm;
  });
}

void Pipeline::align() {
  run_stage("align", [&] {
    const auto corpus = zip_corpus(parse_plain_corpus(require(artifact::kSmtSrc, "align")),
                                   parse_plain_corpus(require(artifact::kSmtTgt, "align")));
    ParallelCorpus flipped;
    flipped.reserve(corpus.size());
    for (const auto& pair : corpus) flipped.push_back({pair.target, pair.source});

    std::vector<double> curve_fwd;
    std::vector<double> curve_rev;
    const auto fwd = ibm1_train(corpus, config_.em_iterations, 1e-12, &curve_fwd, config_.workers);
    const auto rev = ibm1_train(flipped, config_.em_iterations, 1e-12, &curve_rev, config_.workers);

    std::vector<AlignmentMatrix> a_fwd(corpus.size());
    std::vector<AlignmentMatrix> a_rev(corpus.size());
    std::vector<AlignmentMatrix> a_gdf(corpus.size());
    parallel_for(corpus.size(), config_.workers, [&](std::size_t k) {
      a_fwd[k] = viterbi_align(fwd, corpus[k]);
      a_rev[k] = transpose(viterbi_align(rev, flipped[k]));
      a_gdf[k] = grow_diag_final(a_fwd[k], a_rev[k]);
    });
    write_file(out(artifact::kLexF2E), write_lexical_table(fwd));
    write_file(out(artifact::kLexE2F), write_lexical_table(rev));
    write_file(out(artifact::kAlignFwd), write_alignments(a_fwd));
    write_file(out(artifact::kAlignRev), write_alignments(a_rev));
    write_file(out(artifact::kAlignGdf), write_alignments(a_gdf));

    std::size_t links = 0;
    for (const auto& a : a_gdf) links += a.links.size();
    report_["em_loglik"] = {{"forward", curve_fwd}, {"reverse", curve_rev}};
    report_["alignment"] = {{"pairs", corpus.size()}, {"gdf_links", links}};
  });
}

void Pipeline::extract_phrases() {
  run_stage("extract-phrases", [&] {
    const auto corpus = zip_corpus(parse_plain_corpus(require(artifact::kSmtSrc, "extract-phrases")),
                                   parse_plain_corpus(require(artifact::kSmtTgt, "extract-phrases")));
    const auto alignments = read_alignments(require(artifact::kAlignGdf, "extract-phrases"), corpus);
    const auto fwd = read_lexical_table(require(artifact::kLexF2E, "extract-phrases"));
    const auto rev = read_lexical_table(require(artifact::kLexE2F, "extract-phrases"));
    const auto table = build_table(corpus, alignments, fwd, rev, config_.max_phrase_len);
    write_file(out(artifact::kPhraseTable), write_table(table));
    report_["phrase_table"] = {{"entries", table.size()}, {"source_phrases", table.source_phrases()}};
  });
}

void Pipeline::train_smt() {
  preprocess();
  train_lm();
  align();
  extract_phrases();
}

void Pipeline::smt_translate() {
  run_stage("smt-translate", [&] {
    const auto lm = read_arpa(require(artifact::kLm, "smt-translate"));
    const auto table = read_table(require(artifact::kPhraseTable, "smt-translate"));
    const auto input = parse_plain_corpus(require(artifact::kApeSrc, "smt-translate"));
    std::vector<Translation> results(input.size());
    std::vector<std::vector<StackTrace>> traces(trace_ ? input.size() : 0);
    parallel_for(input.size(), config_.workers, [&](std::size_t k) {
      results[k] = decode(input[k], table, lm, config_.decoder, trace_ ? &traces[k] : nullptr);
    });
    std::vector<Sentence> output;
    output.reserve(results.size());
    for (auto& r : results) output.push_back(std::move(r.tokens));
    write_file(out(artifact::kSmtOutput), write_plain_corpus(output));
    if (trace_) {
      std::string tsv = "sentence\tcardinality\tsize_after_pruning\tbest_score\n";
      char buf[128];
      for (std::size_t k = 0; k < traces.size(); ++k) {
        for (const auto& t : traces[k]) {
          std::snprintf(buf, sizeof buf, "%zu\t%zu\t%zu\t%.6f\n", k + 1, t.cardinality, t.size_after_pruning,
                        t.best_score);
          tsv += buf;
        }
      }
      write_file(out(artifact::kSmtTrace), tsv);
    }
    report_["smt"] = {{"sentences", input.size()}};
  });
}

std::string Pipeline::smt_translate_text(std::string_view raw_text) {
  const auto lm = read_arpa(require(artifact::kLm, "smt-translate"));
  const auto table = read_table(require(artifact::kPhraseTable, "smt-translate"));
  const auto truecaser = read_truecase_model(require(artifact::kTruecaseSrc, "smt-translate"));
  std::vector<Sentence> input;
  for (const auto& line : split_lines(raw_text)) input.push_back(truecase(tokenize(line), truecaser));
  auto output = hmt::smt_translate(input, table, lm, config_.decoder, config_.workers);
  for (auto& s : output) s = detruecase(s);
  return write_plain_corpus(output);
}

void Pipeline::train_ape() {
  run_stage("train-ape", [&] {
    const auto smt_out = parse_plain_corpus(require(artifact::kSmtOutput, "train-ape"));
    const auto gold = parse_plain_corpus(require(artifact::kApeTgt, "train-ape"));
    std::vector<double> curve;
    const auto model = hmt::train_ape(smt_out, gold, config_.train, &curve);
    write_file(out(artifact::kApeModel), ape::write_model(model));
    report_["ape"] = {{"pairs", gold.size()}, {"vocab_size", model.vocab.size()}, {"loss_curve", curve}};
  });
}

void Pipeline::hybrid_translate() {
  run_stage("hybrid-translate", [&] {
    const auto lm = read_arpa(require(artifact::kLm, "hybrid-translate"));
    const auto table = read_table(require(artifact::kPhraseTable, "hybrid-translate"));
    const auto truecaser = read_truecase_model(require(artifact::kTruecaseSrc, "hybrid-translate"));
    const auto model = ape::read_model(require(artifact::kApeModel, "hybrid-translate"));
    auto doc = parse_sgm(read_file(config_.paths.test_sgm));

    std::vector<SgmDocument::Segment*> segs;
    for (auto& d : doc.docs) {
      for (auto& s : d.segs) segs.push_back(&s);
    }
    parallel_for(segs.size(), config_.workers, [&](std::size_t k) {
      const auto source = truecase(tokenize(segs[k]->text), truecaser);
      if (source.empty()) {
        segs[k]->text.clear();
        return;
      }
      const auto smt = decode(source, table, lm, config_.decoder).tokens;
      const auto edited = ape::translate(model.params, smt, model.vocab, model.config.max_len);
      segs[k]->text = join_tokens(detruecase(edited));
    });
    doc.kind = SgmDocument::Kind::Test;
    write_file(out(artifact::kHybridSgm), emit_sgm(doc));
    report_["hybrid"] = {{"documents", doc.docs.size()}, {"segments", segs.size()}};
  });
}

MetricScores Pipeline::evaluate() {
  MetricScores scores;
  run_stage("evaluate", [&] {
    if (config_.paths.ref_sgm.empty()) throw ConfigError("evaluate: paths.ref_sgm is not set");
    const auto hyp = parse_sgm(require(artifact::kHybridSgm, "evaluate"));
    const auto ref = parse_sgm(read_file(config_.paths.ref_sgm));
    std::map<std::pair<std::string, long>, const std::string*> ref_segs;
    for (const auto& d : ref.docs) {
      for (const auto& s : d.segs) ref_segs[{d.doc_id, s.id}] = &s.text;
    }
    std::vector<EvalPair> pairs;
    for (const auto& d : hyp.docs) {
      for (const auto& s : d.segs) {
        auto it = ref_segs.find({d.doc_id, s.id});
        if (it == ref_segs.end()) {
          throw PipelineError("evaluate: reference has no seg " + std::to_string(s.id) + " in doc " + d.doc_id);
        }
        pairs.push_back({tokenize(s.text), tokenize(*it->second)});
      }
    }
    if (pairs.size() != ref_segs.size()) {
      throw PipelineError("evaluate: hypothesis has " + std::to_string(pairs.size()) + " segs but reference has " +
                          std::to_string(ref_segs.size()));
    }
    scores = score_all(pairs);
    const auto ter_info = ter_detail(pairs);
    const auto char_info = character_detail(pairs);
    report_["scores"] = {{"BLEU", scores.bleu},
                         {"BLEU-cased", scores.bleu_cased},
                         {"TER", scores.ter},
                         {"CharacTER", scores.character},
                         {"ter_excluded_empty_refs", ter_info.excluded},
                         {"character_empty_hypotheses", char_info.empty_hypotheses}};
  });
  return scores;
}

void Pipeline::run_all() {
  report_ = json::object();
  report_["config"] = config_to_json(config_);
  report_["config"]["paths"].erase("output_dir");  // keeps reports of separate runs comparable
  train_smt();
  smt_translate();
  train_ape();
  hybrid_translate();
  if (!config_.paths.ref_sgm.empty()) evaluate();
}

}  // namespace hmt
