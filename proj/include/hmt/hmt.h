/* C interface of the hybrid SMT + neural post-editing toolkit.
 *
 * Every function returns an hmt_status. On failure the message is available
 * from hmt_last_error() until the next call on the same thread. Strings
 * returned through char** are owned by the caller and freed with
 * hmt_string_free(). Handles are not thread-safe for mutation, but const
 * handles may be shared between threads. */
#ifndef HMT_H
#define HMT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define HMT_API __declspec(dllexport)
#else
#define HMT_API __attribute__((visibility("default")))
#endif

typedef enum hmt_status {
  HMT_OK = 0,
  HMT_ERR_PARAMETER = 1,
  HMT_ERR_ENCODING = 2,
  HMT_ERR_PARSE = 3,
  HMT_ERR_CONFIG = 4,
  HMT_ERR_PIPELINE = 5,
  HMT_ERR_IO = 6,
  HMT_ERR_INTERNAL = 7
} hmt_status;

HMT_API const char* hmt_last_error(void);
HMT_API const char* hmt_status_name(hmt_status status);
HMT_API void hmt_string_free(char* s);

/* Space-joined tokens of one line of text. */
HMT_API hmt_status hmt_tokenize(const char* text, char** out);

/* Metrics over pre-tokenized texts, one sentence per line. */
typedef struct hmt_scores {
  double bleu;
  double bleu_cased;
  double ter;
  double character;
} hmt_scores;

HMT_API hmt_status hmt_score(const char* hypothesis_text, const char* reference_text, hmt_scores* out);
/* "metric<TAB>score" lines. */
HMT_API hmt_status hmt_format_scores(const hmt_scores* scores, char** out);

/* N-gram language model. */
typedef struct hmt_lm hmt_lm;

HMT_API hmt_status hmt_lm_train(const char* corpus_text, int order, hmt_lm** out);
HMT_API hmt_status hmt_lm_read_arpa(const char* arpa_text, hmt_lm** out);
HMT_API hmt_status hmt_lm_write_arpa(const hmt_lm* lm, char** out);
HMT_API hmt_status hmt_lm_sentence_logprob(const hmt_lm* lm, const char* sentence, double* out);
HMT_API hmt_status hmt_lm_perplexity(const hmt_lm* lm, const char* corpus_text, double* out);
HMT_API void hmt_lm_free(hmt_lm* lm);

/* Phrase-based decoder: a phrase table plus a copy of a language model. */
typedef struct hmt_smt hmt_smt;

HMT_API hmt_status hmt_smt_create(const char* phrase_table_text, const hmt_lm* lm, hmt_smt** out);
HMT_API hmt_status hmt_smt_translate(const hmt_smt* smt, const char* sentence, char** out, double* score);
HMT_API void hmt_smt_free(hmt_smt* smt);

/* Post-editing model. */
typedef struct hmt_ape hmt_ape;

HMT_API hmt_status hmt_ape_read(const char* model_text, hmt_ape** out);
HMT_API hmt_status hmt_ape_translate(const hmt_ape* ape, const char* sentence, char** out);
HMT_API void hmt_ape_free(hmt_ape* ape);

/* Pipeline over a JSON config file. out_dir may be NULL to keep the
 * configured one; workers <= 0 and seed < 0 keep the configured values. */
typedef struct hmt_pipeline hmt_pipeline;

HMT_API hmt_status hmt_pipeline_open(const char* config_path, const char* out_dir, int workers, long long seed,
                                     hmt_pipeline** out);
HMT_API void hmt_pipeline_set_trace(hmt_pipeline* pipeline, int enabled);
/* Runs one stage by its CLI name ("preprocess", "stats", ..., "run-all").
 * Text meant for standard output is returned through out when not NULL. */
HMT_API hmt_status hmt_pipeline_run(hmt_pipeline* pipeline, const char* stage, char** out);
/* SMT-only translation of raw text lines with the trained artifacts. */
HMT_API hmt_status hmt_pipeline_smt_translate_text(hmt_pipeline* pipeline, const char* raw_text, char** out);
/* report.json content. */
HMT_API hmt_status hmt_pipeline_report(const hmt_pipeline* pipeline, char** out);
HMT_API void hmt_pipeline_free(hmt_pipeline* pipeline);

/* Reads a whole file. */
HMT_API hmt_status hmt_read_file(const char* path, char** out);

#ifdef __cplusplus
}
#endif

#endif
