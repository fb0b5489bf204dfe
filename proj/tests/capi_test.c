#include <math.h>
#include <stdio.h>
#include <string.h>

#include "hmt/hmt.h"

static int failures = 0;

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "%s:%d: check failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                    \
    }                                                                \
  } while (0)

static void test_tokenize(void) {
  char* out = NULL;
  CHECK(hmt_tokenize("Hello, world!", &out) == HMT_OK);
  CHECK(out && strcmp(out, "Hello , world !") == 0);
  hmt_string_free(out);

  CHECK(hmt_tokenize("bad \xff byte", &out) == HMT_ERR_ENCODING);
  CHECK(strlen(hmt_last_error()) > 0);
  CHECK(hmt_tokenize(NULL, &out) == HMT_ERR_PARAMETER);
}

static void test_scores(void) {
  hmt_scores s;
  char* text = NULL;
  CHECK(hmt_score("the cat sat on the mat\n", "the cat sat on the mat\n", &s) == HMT_OK);
  CHECK(fabs(s.bleu - 100.0) < 1e-9);
  CHECK(fabs(s.ter) < 1e-12);
  CHECK(hmt_format_scores(&s, &text) == HMT_OK);
  CHECK(text && strncmp(text, "BLEU\t100.0000\n", 14) == 0);
  hmt_string_free(text);
  CHECK(hmt_score("a\nb\n", "a\n", &s) == HMT_ERR_PARAMETER);
}

static void test_lm_and_smt(void) {
  hmt_lm* lm = NULL;
  hmt_lm* again = NULL;
  char* arpa = NULL;
  double lp = 0.0;
  double lp2 = 0.0;
  CHECK(hmt_lm_train("a b\na b\na c\n", 2, &lm) == HMT_OK);
  CHECK(hmt_lm_sentence_logprob(lm, "a b", &lp) == HMT_OK);
  CHECK(lp < 0.0);
  CHECK(hmt_lm_write_arpa(lm, &arpa) == HMT_OK);
  CHECK(hmt_lm_read_arpa(arpa, &again) == HMT_OK);
  CHECK(hmt_lm_sentence_logprob(again, "a b", &lp2) == HMT_OK);
  CHECK(fabs(lp - lp2) < 1e-6);
  hmt_string_free(arpa);
  hmt_lm_free(again);
  CHECK(hmt_lm_read_arpa("garbage", &again) == HMT_ERR_PARSE);

  hmt_smt* smt = NULL;
  char* out = NULL;
  double score = 0.0;
  const char* table = "x ||| a ||| 1 1 1 1\ny ||| b ||| 1 1 1 1\n";
  CHECK(hmt_smt_create(table, lm, &smt) == HMT_OK);
  CHECK(hmt_smt_translate(smt, "x y", &out, &score) == HMT_OK);
  CHECK(out && strcmp(out, "a b") == 0);
  CHECK(score < 0.0);
  hmt_string_free(out);
  hmt_smt_free(smt);
  CHECK(hmt_smt_create("x ||| a\n", lm, &smt) == HMT_ERR_PARSE);
  hmt_lm_free(lm);
}

static void test_errors(void) {
  hmt_pipeline* p = NULL;
  hmt_ape* ape = NULL;
  char* text = NULL;
  CHECK(hmt_pipeline_open("/nonexistent/config.json", NULL, 0, -1, &p) == HMT_ERR_CONFIG);
  CHECK(hmt_ape_read("not a model", &ape) == HMT_ERR_PARSE);
  CHECK(hmt_read_file("/nonexistent/file", &text) == HMT_ERR_IO);
  CHECK(strcmp(hmt_status_name(HMT_ERR_PIPELINE), "pipeline error") == 0);
  hmt_pipeline_free(NULL);
  hmt_lm_free(NULL);
}

int main(void) {
  test_tokenize();
  test_scores();
  test_lm_and_smt();
  test_errors();
  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("all C API checks passed\n");
  return 0;
}
