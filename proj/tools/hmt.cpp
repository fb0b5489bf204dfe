// Command-line front end over the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "hmt/hmt.h"

namespace {

int exit_code(hmt_status status) {
  if (status == HMT_OK) return 0;
  return status == HMT_ERR_CONFIG ? 2 : 1;
}

int fail(hmt_status status) {
  std::cerr << "hmt: " << hmt_status_name(status) << ": " << hmt_last_error() << "\n";
  return exit_code(status);
}

// Owns a string handed out by the library.
struct Text {
  char* ptr = nullptr;
  ~Text() { hmt_string_free(ptr); }
};

int evaluate_files(const std::string& hyp_path, const std::string& ref_path) {
  Text hyp;
  Text ref;
  Text report;
  hmt_scores scores{};
  hmt_status st = hmt_read_file(hyp_path.c_str(), &hyp.ptr);
  if (st == HMT_OK) st = hmt_read_file(ref_path.c_str(), &ref.ptr);
  if (st == HMT_OK) st = hmt_score(hyp.ptr, ref.ptr, &scores);
  if (st == HMT_OK) st = hmt_format_scores(&scores, &report.ptr);
  if (st != HMT_OK) return fail(st);
  std::cout << report.ptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid phrase-based SMT with neural automatic post-editing"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir;
  int workers = 0;
  long long seed = -1;
  app.add_option("--config", config_path, "pipeline config (JSON)");
  app.add_option("--out", out_dir, "output directory, overrides paths.output_dir");
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "random seed, overrides the config")->check(CLI::NonNegativeNumber);

  const char* stages[][2] = {
      {"preprocess", "tokenize, clean, split and truecase the training data"},
      {"stats", "print corpus statistics of the cleaned corpus"},
      {"train-lm", "estimate the target language model"},
      {"align", "train IBM Model 1 both ways and symmetrize"},
      {"extract-phrases", "build the phrase table"},
      {"train-smt", "preprocess, train-lm, align and extract-phrases"},
      {"smt-translate", "translate the post-editing split with the SMT system"},
      {"train-ape", "train the post-editor on SMT output and gold text"},
      {"hybrid-translate", "translate the test SGM through SMT and post-editing"},
      {"evaluate", "score a hypothesis against a reference"},
      {"run-all", "run every stage in order"},
  };
  for (const auto& s : stages) app.add_subcommand(s[0], s[1])->fallthrough();

  auto* evaluate = app.get_subcommand("evaluate");
  std::string hyp_path;
  std::string ref_path;
  evaluate->add_option("--hyp", hyp_path, "hypothesis file, one tokenized sentence per line");
  evaluate->add_option("--ref", ref_path, "reference file, one tokenized sentence per line");

  auto* smt_translate = app.get_subcommand("smt-translate");
  std::string input_path;
  bool trace = false;
  smt_translate->add_option("--input", input_path, "raw text to translate to stdout instead of the split");
  smt_translate->add_flag("--trace", trace, "write per-stack statistics to smt-trace.tsv");
  app.get_subcommand("run-all")->add_flag("--trace", trace, "write per-stack statistics to smt-trace.tsv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  if (stage == "evaluate" && (!hyp_path.empty() || !ref_path.empty())) {
    if (hyp_path.empty() || ref_path.empty()) {
      std::cerr << "hmt: evaluate needs both --hyp and --ref\n";
      return 2;
    }
    return evaluate_files(hyp_path, ref_path);
  }
  if (config_path.empty()) {
    std::cerr << "hmt: " << stage << " needs --config\n";
    return 2;
  }

  hmt_pipeline* pipeline = nullptr;
  hmt_status st = hmt_pipeline_open(config_path.c_str(), out_dir.empty() ? nullptr : out_dir.c_str(), workers, seed,
                                    &pipeline);
  if (st != HMT_OK) return fail(st);
  hmt_pipeline_set_trace(pipeline, trace ? 1 : 0);

  Text output;
  if (stage == "smt-translate" && !input_path.empty()) {
    Text input;
    st = hmt_read_file(input_path.c_str(), &input.ptr);
    if (st == HMT_OK) st = hmt_pipeline_smt_translate_text(pipeline, input.ptr, &output.ptr);
  } else {
    st = hmt_pipeline_run(pipeline, stage.c_str(), &output.ptr);
  }
  hmt_pipeline_free(pipeline);
  if (st != HMT_OK) return fail(st);
  if (output.ptr) std::cout << output.ptr;
  return 0;
}
