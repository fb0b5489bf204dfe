#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmt/textprep.hpp"

// LSTM encoder-decoder used as an automatic post-editor: it maps SMT output
// to corrected text. Single layer on each side, no attention; the final
// encoder hidden state is fed to every decoder step as a fixed context.
namespace hmt::ape {

using TokenId = std::uint32_t;

class ApeVocab {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr TokenId kPad = 3;

  ApeVocab();

  // Keeps the max_vocab most frequent words (ties lexicographic) after the
  // four reserved entries.
  static ApeVocab build(const std::vector<Sentence>& text, std::size_t max_vocab);

  TokenId add(std::string_view word);
  TokenId id(std::string_view word) const;
  const std::string& word(TokenId id) const { return words_.at(id); }
  std::size_t size() const { return words_.size(); }
  std::vector<TokenId> encode(const Sentence& sentence) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> ids_;
};

enum class Optimizer { Sgd, Adam };

struct TrainConfig {
  std::size_t d = 64;
  std::size_t max_vocab = 30000;
  int epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 5.0;  // max global norm, <= 0 disables
  std::uint64_t seed = 1;
  std::size_t max_len = 80;
};

// Gate rows are stacked input, forget, output, candidate (4d rows).
struct LstmWeights {
  Eigen::MatrixXd input;      // 4d x input size
  Eigen::MatrixXd recurrent;  // 4d x d
  Eigen::MatrixXd bias;       // 4d x 1
};

struct Seq2SeqParams {
  static constexpr std::size_t kTensorCount = 10;
  static const std::array<const char*, kTensorCount> kTensorNames;

  Eigen::MatrixXd src_embed;  // d x V_x, one column per token
  Eigen::MatrixXd tgt_embed;  // d x V_y
  LstmWeights encoder;        // input d
  LstmWeights decoder;        // input 2d: target embedding then context
  Eigen::MatrixXd out_weight;  // d x V_y
  Eigen::MatrixXd out_bias;    // V_y x 1

  std::size_t hidden() const { return static_cast<std::size_t>(src_embed.rows()); }
  std::size_t src_vocab() const { return static_cast<std::size_t>(src_embed.cols()); }
  std::size_t tgt_vocab() const { return static_cast<std::size_t>(tgt_embed.cols()); }

  std::array<Eigen::MatrixXd*, kTensorCount> tensors();
  std::array<const Eigen::MatrixXd*, kTensorCount> tensors() const;

  // Same shapes, all zeros.
  Seq2SeqParams zeros_like() const;
  bool all_finite() const;
};

// Embeddings and LSTM weights uniform in [-0.08, 0.08]; output layer zero;
// forget-gate biases +1.
Seq2SeqParams init_params(std::size_t d, std::size_t src_vocab, std::size_t tgt_vocab, std::uint64_t seed);

struct Context {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

struct DecoderState {
  Eigen::VectorXd s;
  Eigen::VectorXd cell;
};

Context encode(const Seq2SeqParams& params, const std::vector<TokenId>& src_ids);

// Initial decoder state taken from the encoder.
DecoderState initial_state(const Context& context);

struct StepOutput {
  Eigen::VectorXd logits;
  DecoderState state;
};

StepOutput decode_step(const Seq2SeqParams& params, TokenId prev_y, const DecoderState& state,
                       const Context& context);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Teacher-forced training pair. dec_input is the framed gold sequence
// <s> y1 .. ym </s>; dec_target is y1 .. ym </s>. Step t consumes
// dec_input[t] and predicts dec_target[t], so the last input is never read.
struct Example {
  std::vector<TokenId> src;
  std::vector<TokenId> dec_input;
  std::vector<TokenId> dec_target;
};

Example make_example(std::vector<TokenId> src, const std::vector<TokenId>& tgt);
Example make_example(const ApeVocab& vocab, const Sentence& src, const Sentence& tgt, std::size_t max_len);

// Mean over pairs of the summed negative log-likelihood (natural log) of the
// gold targets; PAD targets are skipped.
double loss(const Seq2SeqParams& params, const std::vector<Example>& batch);

struct LossAndGrad {
  double loss = 0.0;
  std::size_t tokens = 0;
  Seq2SeqParams grad;
};

// Exact gradient of loss() by backpropagation through time.
LossAndGrad grad(const Seq2SeqParams& params, const std::vector<Example>& batch);

struct TrainResult {
  // Per epoch: mean per-token negative log-likelihood over that epoch's batches.
  std::vector<double> loss_curve;
};

TrainResult train(Seq2SeqParams& params, const std::vector<Example>& corpus, const TrainConfig& config);

// Greedy decoding. UNK outputs copy the source token at the same position
// when there is one and are dropped otherwise.
Sentence translate(const Seq2SeqParams& params, const Sentence& src, const ApeVocab& vocab, std::size_t max_len);

struct ApeModel {
  TrainConfig config;
  ApeVocab vocab;
  Seq2SeqParams params;
};

std::string write_model(const ApeModel& model);
ApeModel read_model(std::string_view text);

}  // namespace hmt::ape
