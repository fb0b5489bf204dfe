#include "hmt/hmt.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "hmt/ape.hpp"
#include "hmt/decoder.hpp"
#include "hmt/error.hpp"
#include "hmt/metrics.hpp"
#include "hmt/ngram_lm.hpp"
#include "hmt/phrases.hpp"
#include "hmt/pipeline.hpp"

struct hmt_lm {
  hmt::NgramModel model;
};

struct hmt_smt {
  hmt::NgramModel lm;
  hmt::PhraseTable table;
  hmt::DecoderConfig config;
};

struct hmt_ape {
  hmt::ape::ApeModel model;
};

struct hmt_pipeline {
  hmt::Pipeline pipeline;
};

namespace {

thread_local std::string last_error;

template <typename Fn>
hmt_status guard(Fn&& fn) {
  try {
    last_error.clear();
    fn();
    return HMT_OK;
  } catch (const hmt::ParameterError& e) {
    last_error = e.what();
    return HMT_ERR_PARAMETER;
  } catch (const hmt::EncodingError& e) {
    last_error = e.what();
    return HMT_ERR_ENCODING;
  } catch (const hmt::ParseError& e) {
    last_error = e.what();
    return HMT_ERR_PARSE;
  } catch (const hmt::ConfigError& e) {
    last_error = e.what();
    return HMT_ERR_CONFIG;
  } catch (const hmt::PipelineError& e) {
    last_error = e.what();
    return HMT_ERR_PIPELINE;
  } catch (const hmt::IoError& e) {
    last_error = e.what();
    return HMT_ERR_IO;
  } catch (const std::exception& e) {
    last_error = e.what();
    return HMT_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return HMT_ERR_INTERNAL;
  }
}

void require(const void* p, const char* name) {
  if (!p) throw hmt::ParameterError(std::string(name) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

hmt::Sentence words(const char* text) {
  auto lines = hmt::parse_plain_corpus(text);
  return lines.empty() ? hmt::Sentence{} : lines.front();
}

}  // namespace

extern "C" {

const char* hmt_last_error(void) { return last_error.c_str(); }

const char* hmt_status_name(hmt_status status) {
  switch (status) {
    case HMT_OK: return "ok";
    case HMT_ERR_PARAMETER: return "parameter error";
    case HMT_ERR_ENCODING: return "encoding error";
    case HMT_ERR_PARSE: return "parse error";
    case HMT_ERR_CONFIG: return "config error";
    case HMT_ERR_PIPELINE: return "pipeline error";
    case HMT_ERR_IO: return "io error";
    case HMT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void hmt_string_free(char* s) { std::free(s); }

hmt_status hmt_tokenize(const char* text, char** out) {
  return guard([&] {
    require(text, "text");
    require(out, "out");
    *out = dup_string(hmt::join_tokens(hmt::tokenize(text)));
  });
}

hmt_status hmt_score(const char* hypothesis_text, const char* reference_text, hmt_scores* out) {
  return guard([&] {
    require(hypothesis_text, "hypothesis_text");
    require(reference_text, "reference_text");
    require(out, "out");
    const auto pairs =
        hmt::make_eval_pairs(hmt::parse_plain_corpus(hypothesis_text), hmt::parse_plain_corpus(reference_text));
    const auto s = hmt::score_all(pairs);
    *out = {s.bleu, s.bleu_cased, s.ter, s.character};
  });
}

hmt_status hmt_format_scores(const hmt_scores* scores, char** out) {
  return guard([&] {
    require(scores, "scores");
    require(out, "out");
    *out = dup_string(hmt::format_scores({scores->bleu, scores->bleu_cased, scores->ter, scores->character}));
  });
}

hmt_status hmt_lm_train(const char* corpus_text, int order, hmt_lm** out) {
  return guard([&] {
    require(corpus_text, "corpus_text");
    require(out, "out");
    const auto corpus = hmt::parse_plain_corpus(corpus_text);
    const auto vocab = hmt::Vocab::build(corpus);
    *out = new hmt_lm{hmt::estimate_kn(hmt::count_ngrams(corpus, vocab, order))};
  });
}

hmt_status hmt_lm_read_arpa(const char* arpa_text, hmt_lm** out) {
  return guard([&] {
    require(arpa_text, "arpa_text");
    require(out, "out");
    *out = new hmt_lm{hmt::read_arpa(arpa_text)};
  });
}

hmt_status hmt_lm_write_arpa(const hmt_lm* lm, char** out) {
  return guard([&] {
    require(lm, "lm");
    require(out, "out");
    *out = dup_string(hmt::write_arpa(lm->model));
  });
}

hmt_status hmt_lm_sentence_logprob(const hmt_lm* lm, const char* sentence, double* out) {
  return guard([&] {
    require(lm, "lm");
    require(sentence, "sentence");
    require(out, "out");
    *out = hmt::sentence_logprob(lm->model, words(sentence));
  });
}

hmt_status hmt_lm_perplexity(const hmt_lm* lm, const char* corpus_text, double* out) {
  return guard([&] {
    require(lm, "lm");
    require(corpus_text, "corpus_text");
    require(out, "out");
    *out = hmt::perplexity(lm->model, hmt::parse_plain_corpus(corpus_text));
  });
}

void hmt_lm_free(hmt_lm* lm) { delete lm; }

hmt_status hmt_smt_create(const char* phrase_table_text, const hmt_lm* lm, hmt_smt** out) {
  return guard([&] {
    require(phrase_table_text, "phrase_table_text");
    require(lm, "lm");
    require(out, "out");
    *out = new hmt_smt{lm->model, hmt::read_table(phrase_table_text), hmt::DecoderConfig{}};
  });
}

hmt_status hmt_smt_translate(const hmt_smt* smt, const char* sentence, char** out, double* score) {
  return guard([&] {
    require(smt, "smt");
    require(sentence, "sentence");
    require(out, "out");
    const auto result = hmt::decode(words(sentence), smt->table, smt->lm, smt->config);
    *out = dup_string(hmt::join_tokens(result.tokens));
    if (score) *score = result.model_score;
  });
}

void hmt_smt_free(hmt_smt* smt) { delete smt; }

hmt_status hmt_ape_read(const char* model_text, hmt_ape** out) {
  return guard([&] {
    require(model_text, "model_text");
    require(out, "out");
    *out = new hmt_ape{hmt::ape::read_model(model_text)};
  });
}

hmt_status hmt_ape_translate(const hmt_ape* ape, const char* sentence, char** out) {
  return guard([&] {
    require(ape, "ape");
    require(sentence, "sentence");
    require(out, "out");
    const auto& m = ape->model;
    *out = dup_string(hmt::join_tokens(hmt::ape::translate(m.params, words(sentence), m.vocab, m.config.max_len)));
  });
}

void hmt_ape_free(hmt_ape* ape) { delete ape; }

hmt_status hmt_pipeline_open(const char* config_path, const char* out_dir, int workers, long long seed,
                             hmt_pipeline** out) {
  return guard([&] {
    require(config_path, "config_path");
    require(out, "out");
    auto config = hmt::load_config(config_path);
    if (out_dir && *out_dir) config.paths.output_dir = out_dir;
    if (workers > 0) config.workers = static_cast<unsigned>(workers);
    if (seed >= 0) {
      config.seed = static_cast<std::uint64_t>(seed);
      config.train.seed = config.seed;
    }
    *out = new hmt_pipeline{hmt::Pipeline(std::move(config))};
  });
}

void hmt_pipeline_set_trace(hmt_pipeline* pipeline, int enabled) {
  if (pipeline) pipeline->pipeline.set_trace(enabled != 0);
}

hmt_status hmt_pipeline_run(hmt_pipeline* pipeline, const char* stage, char** out) {
  return guard([&] {
    require(pipeline, "pipeline");
    require(stage, "stage");
    auto& p = pipeline->pipeline;
    const std::string name = stage;
    std::string text;
    if (name == "preprocess") {
      p.preprocess();
    } else if (name == "stats") {
      const auto s = p.stats();
      text = "side\tsentences\ttokens\tvocab\nsource\t" + std::to_string(s.source_sentences) + "\t" +
             std::to_string(s.source_tokens) + "\t" + std::to_string(s.source_vocab) + "\ntarget\t" +
             std::to_string(s.target_sentences) + "\t" + std::to_string(s.target_tokens) + "\t" +
             std::to_string(s.target_vocab) + "\n";
    } else if (name == "train-lm") {
      p.train_lm();
    } else if (name == "align") {
      p.align();
    } else if (name == "extract-phrases") {
      p.extract_phrases();
    } else if (name == "train-smt") {
      p.train_smt();
    } else if (name == "smt-translate") {
      p.smt_translate();
    } else if (name == "train-ape") {
      p.train_ape();
    } else if (name == "hybrid-translate") {
      p.hybrid_translate();
    } else if (name == "evaluate") {
      text = hmt::format_scores(p.evaluate());
    } else if (name == "run-all") {
      p.run_all();
      if (p.report().contains("scores")) {
        const auto& s = p.report()["scores"];
        text = hmt::format_scores({s["BLEU"], s["BLEU-cased"], s["TER"], s["CharacTER"]});
      }
    } else {
      throw hmt::ParameterError("unknown stage '" + name + "'");
    }
    if (out) *out = dup_string(text);
  });
}

hmt_status hmt_pipeline_smt_translate_text(hmt_pipeline* pipeline, const char* raw_text, char** out) {
  return guard([&] {
    require(pipeline, "pipeline");
    require(raw_text, "raw_text");
    require(out, "out");
    *out = dup_string(pipeline->pipeline.smt_translate_text(raw_text));
  });
}

hmt_status hmt_pipeline_report(const hmt_pipeline* pipeline, char** out) {
  return guard([&] {
    require(pipeline, "pipeline");
    require(out, "out");
    *out = dup_string(pipeline->pipeline.report().dump(2) + "\n");
  });
}

void hmt_pipeline_free(hmt_pipeline* pipeline) { delete pipeline; }

hmt_status hmt_read_file(const char* path, char** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = dup_string(hmt::read_file(path));
  });
}

}  // extern "C"
