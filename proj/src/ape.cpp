#include "hmt/ape.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "hmt/error.hpp"

namespace hmt::ape {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ApeVocab::ApeVocab() {
  add("<s>");
  add("</s>");
  add("<unk>");
  add("<pad>");
}

ApeVocab ApeVocab::build(const std::vector<Sentence>& text, std::size_t max_vocab) {
  std::map<std::string, std::size_t> freq;
  for (const auto& s : text) {
    for (const auto& w : s) ++freq[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  ApeVocab vocab;
  for (const auto& [word, count] : ranked) {
    if (vocab.size() >= max_vocab + 4) break;
    vocab.add(word);
  }
  return vocab;
}

TokenId ApeVocab::add(std::string_view word) {
  auto [it, inserted] = ids_.try_emplace(std::string(word), static_cast<TokenId>(words_.size()));
  if (inserted) words_.emplace_back(word);
  return it->second;
}

TokenId ApeVocab::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<TokenId> ApeVocab::encode(const Sentence& sentence) const {
  std::vector<TokenId> ids;
  ids.reserve(sentence.size());
  for (const auto& w : sentence) ids.push_back(id(w));
  return ids;
}

const std::array<const char*, Seq2SeqParams::kTensorCount> Seq2SeqParams::kTensorNames = {
    "src_embed", "tgt_embed", "enc_input", "enc_recurrent", "enc_bias",
    "dec_input", "dec_recurrent", "dec_bias", "out_weight", "out_bias"};

std::array<MatrixXd*, Seq2SeqParams::kTensorCount> Seq2SeqParams::tensors() {
  return {&src_embed,         &tgt_embed,     &encoder.input, &encoder.recurrent, &encoder.bias,
          &decoder.input,     &decoder.recurrent, &decoder.bias, &out_weight,     &out_bias};
}

std::array<const MatrixXd*, Seq2SeqParams::kTensorCount> Seq2SeqParams::tensors() const {
  return {&src_embed,         &tgt_embed,     &encoder.input, &encoder.recurrent, &encoder.bias,
          &decoder.input,     &decoder.recurrent, &decoder.bias, &out_weight,     &out_bias};
}

Seq2SeqParams Seq2SeqParams::zeros_like() const {
  Seq2SeqParams z;
  auto dst = z.tensors();
  auto src = tensors();
  for (std::size_t k = 0; k < kTensorCount; ++k) *dst[k] = MatrixXd::Zero(src[k]->rows(), src[k]->cols());
  return z;
}

bool Seq2SeqParams::all_finite() const {
  for (const auto* t : tensors()) {
    if (!t->allFinite()) return false;
  }
  return true;
}

Seq2SeqParams init_params(std::size_t d, std::size_t src_vocab, std::size_t tgt_vocab, std::uint64_t seed) {
  const auto D = static_cast<Eigen::Index>(d);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-0.08, 0.08);
  auto random = [&](Eigen::Index rows, Eigen::Index cols) {
    MatrixXd m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = uniform(rng);
    }
    return m;
  };
  Seq2SeqParams p;
  p.src_embed = random(D, static_cast<Eigen::Index>(src_vocab));
  p.tgt_embed = random(D, static_cast<Eigen::Index>(tgt_vocab));
  p.encoder.input = random(4 * D, D);
  p.encoder.recurrent = random(4 * D, D);
  p.encoder.bias = MatrixXd::Zero(4 * D, 1);
  p.encoder.bias.block(D, 0, D, 1).setOnes();
  p.decoder.input = random(4 * D, 2 * D);
  p.decoder.recurrent = random(4 * D, D);
  p.decoder.bias = MatrixXd::Zero(4 * D, 1);
  p.decoder.bias.block(D, 0, D, 1).setOnes();
  p.out_weight = MatrixXd::Zero(D, static_cast<Eigen::Index>(tgt_vocab));
  p.out_bias = MatrixXd::Zero(static_cast<Eigen::Index>(tgt_vocab), 1);
  return p;
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Cached activations of one LSTM step.
struct LstmStep {
  VectorXd x;
  VectorXd h_prev;
  VectorXd c_prev;
  VectorXd i, f, o, g;
  VectorXd c;
  VectorXd tanh_c;
  VectorXd h;
};

void lstm_forward(const LstmWeights& w, const VectorXd& x, const VectorXd& h_prev, const VectorXd& c_prev,
                  LstmStep& step) {
  const Eigen::Index d = h_prev.size();
  VectorXd z = w.input * x + w.recurrent * h_prev + w.bias.col(0);
  step.x = x;
  step.h_prev = h_prev;
  step.c_prev = c_prev;
  step.i = z.segment(0, d).unaryExpr(&sigmoid);
  step.f = z.segment(d, d).unaryExpr(&sigmoid);
  step.o = z.segment(2 * d, d).unaryExpr(&sigmoid);
  step.g = z.segment(3 * d, d).array().tanh();
  step.c = step.f.cwiseProduct(c_prev) + step.i.cwiseProduct(step.g);
  step.tanh_c = step.c.array().tanh();
  step.h = step.o.cwiseProduct(step.tanh_c);
}

// dc carries dL/dc into the step and leaves holding dL/dc_prev.
void lstm_backward(const LstmWeights& w, LstmWeights& gw, const LstmStep& step, const VectorXd& dh, VectorXd& dc,
                   VectorXd& dx, VectorXd& dh_prev) {
  const Eigen::Index d = dh.size();
  const VectorXd d_o = dh.cwiseProduct(step.tanh_c);
  const VectorXd dc_total =
      dc + dh.cwiseProduct(step.o).cwiseProduct((1.0 - step.tanh_c.array().square()).matrix());
  VectorXd dz(4 * d);
  dz.segment(0, d) = dc_total.cwiseProduct(step.g).array() * step.i.array() * (1.0 - step.i.array());
  dz.segment(d, d) = dc_total.cwiseProduct(step.c_prev).array() * step.f.array() * (1.0 - step.f.array());
  dz.segment(2 * d, d) = d_o.array() * step.o.array() * (1.0 - step.o.array());
  dz.segment(3 * d, d) = dc_total.cwiseProduct(step.i).array() * (1.0 - step.g.array().square());
  dc = dc_total.cwiseProduct(step.f);
  gw.input.noalias() += dz * step.x.transpose();
  gw.recurrent.noalias() += dz * step.h_prev.transpose();
  gw.bias.col(0) += dz;
  dx.noalias() = w.input.transpose() * dz;
  dh_prev.noalias() = w.recurrent.transpose() * dz;
}

void check_example(const Seq2SeqParams& params, const Example& ex) {
  if (ex.dec_input.size() < ex.dec_target.size()) throw ParameterError("decoder input shorter than target");
  for (auto t : ex.src) {
    if (t >= params.src_vocab()) throw ParameterError("source token id out of range");
  }
  for (std::size_t t = 0; t < ex.dec_target.size(); ++t) {
    if (ex.dec_input[t] >= params.tgt_vocab() || ex.dec_target[t] >= params.tgt_vocab()) {
      throw ParameterError("target token id out of range");
    }
  }
}

// Negative log-likelihood of one example; accumulates scale * gradient into
// grad when given.
double example_nll(const Seq2SeqParams& p, const Example& ex, double scale, Seq2SeqParams* grad,
                   std::size_t& tokens) {
  check_example(p, ex);
  const auto d = static_cast<Eigen::Index>(p.hidden());
  std::vector<LstmStep> enc(ex.src.size());
  VectorXd h = VectorXd::Zero(d);
  VectorXd c = VectorXd::Zero(d);
  for (std::size_t t = 0; t < ex.src.size(); ++t) {
    lstm_forward(p.encoder, p.src_embed.col(ex.src[t]), h, c, enc[t]);
    h = enc[t].h;
    c = enc[t].c;
  }
  const VectorXd context = h;

  const std::size_t steps = ex.dec_target.size();
  std::vector<LstmStep> dec(steps);
  std::vector<VectorXd> probs(steps);
  VectorXd s = h;
  VectorXd cell = c;
  VectorXd input(2 * d);
  double nll = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    input << p.tgt_embed.col(ex.dec_input[t]), context;
    lstm_forward(p.decoder, input, s, cell, dec[t]);
    s = dec[t].h;
    cell = dec[t].c;
    const VectorXd logits = p.out_weight.transpose() * s + p.out_bias.col(0);
    probs[t] = softmax(logits);
    if (ex.dec_target[t] == ApeVocab::kPad) continue;
    // log-softmax computed directly for accuracy
    const double max_logit = logits.maxCoeff();
    const double log_z = max_logit + std::log((logits.array() - max_logit).exp().sum());
    nll -= logits(ex.dec_target[t]) - log_z;
    ++tokens;
  }
  if (!grad) return nll;

  VectorXd ds = VectorXd::Zero(d);
  VectorXd dcell = VectorXd::Zero(d);
  VectorXd dcontext = VectorXd::Zero(d);
  VectorXd dx(2 * d);
  VectorXd dh_prev(d);
  for (std::size_t t = steps; t-- > 0;) {
    if (ex.dec_target[t] != ApeVocab::kPad) {
      VectorXd dlogits = probs[t] * scale;
      dlogits(ex.dec_target[t]) -= scale;
      grad->out_weight.noalias() += dec[t].h * dlogits.transpose();
      grad->out_bias.col(0) += dlogits;
      ds.noalias() += p.out_weight * dlogits;
    }
    lstm_backward(p.decoder, grad->decoder, dec[t], ds, dcell, dx, dh_prev);
    grad->tgt_embed.col(ex.dec_input[t]) += dx.segment(0, d);
    dcontext += dx.segment(d, d);
    ds = dh_prev;
  }

  VectorXd dh = ds + dcontext;
  VectorXd dc = dcell;
  VectorXd dxe(d);
  for (std::size_t t = ex.src.size(); t-- > 0;) {
    lstm_backward(p.encoder, grad->encoder, enc[t], dh, dc, dxe, dh_prev);
    grad->src_embed.col(ex.src[t]) += dxe;
    dh = dh_prev;
  }
  return nll;
}

}  // namespace

Context encode(const Seq2SeqParams& params, const std::vector<TokenId>& src_ids) {
  const auto d = static_cast<Eigen::Index>(params.hidden());
  Context ctx{VectorXd::Zero(d), VectorXd::Zero(d)};
  LstmStep step;
  for (auto id : src_ids) {
    if (id >= params.src_vocab()) throw ParameterError("encode: token id out of range");
    lstm_forward(params.encoder, params.src_embed.col(id), ctx.h, ctx.c, step);
    ctx.h = step.h;
    ctx.c = step.c;
  }
  return ctx;
}

DecoderState initial_state(const Context& context) { return {context.h, context.c}; }

StepOutput decode_step(const Seq2SeqParams& params, TokenId prev_y, const DecoderState& state,
                       const Context& context) {
  if (prev_y >= params.tgt_vocab()) throw ParameterError("decode_step: token id out of range");
  const auto d = static_cast<Eigen::Index>(params.hidden());
  VectorXd input(2 * d);
  input << params.tgt_embed.col(prev_y), context.h;
  LstmStep step;
  lstm_forward(params.decoder, input, state.s, state.cell, step);
  StepOutput out;
  out.logits = params.out_weight.transpose() * step.h + params.out_bias.col(0);
  out.state = {step.h, step.c};
  return out;
}

VectorXd softmax(const VectorXd& logits) {
  const VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

Example make_example(std::vector<TokenId> src, const std::vector<TokenId>& tgt) {
  Example ex;
  ex.src = std::move(src);
  ex.dec_input.reserve(tgt.size() + 2);
  ex.dec_input.push_back(ApeVocab::kBos);
  ex.dec_input.insert(ex.dec_input.end(), tgt.begin(), tgt.end());
  ex.dec_input.push_back(ApeVocab::kEos);
  ex.dec_target.assign(tgt.begin(), tgt.end());
  ex.dec_target.push_back(ApeVocab::kEos);
  return ex;
}

Example make_example(const ApeVocab& vocab, const Sentence& src, const Sentence& tgt, std::size_t max_len) {
  auto s = vocab.encode(src);
  auto t = vocab.encode(tgt);
  if (s.size() > max_len) s.resize(max_len);
  if (t.size() > max_len) t.resize(max_len);
  return make_example(std::move(s), t);
}

double loss(const Seq2SeqParams& params, const std::vector<Example>& batch) {
  if (batch.empty()) throw ParameterError("loss: empty batch");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : batch) total += example_nll(params, ex, 0.0, nullptr, tokens);
  return total / static_cast<double>(batch.size());
}

LossAndGrad grad(const Seq2SeqParams& params, const std::vector<Example>& batch) {
  if (batch.empty()) throw ParameterError("grad: empty batch");
  LossAndGrad out;
  out.grad = params.zeros_like();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& ex : batch) total += example_nll(params, ex, scale, &out.grad, out.tokens);
  out.loss = total * scale;
  return out;
}

TrainResult train(Seq2SeqParams& params, const std::vector<Example>& corpus, const TrainConfig& config) {
  if (corpus.empty()) throw ParameterError("train: corpus is empty");
  if (config.epochs < 1) throw ParameterError("train: epochs must be >= 1");
  const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  Seq2SeqParams m = params.zeros_like();
  Seq2SeqParams v = params.zeros_like();
  std::uint64_t step = 0;
  TrainResult result;
  std::vector<Example> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_nll = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      batch.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k) batch.push_back(corpus[order[k]]);
      auto lg = grad(params, batch);
      epoch_nll += lg.loss * static_cast<double>(batch.size());
      epoch_tokens += lg.tokens;

      auto grads = lg.grad.tensors();
      if (config.grad_clip > 0.0) {
        double norm_sq = 0.0;
        for (const auto* g : grads) norm_sq += g->squaredNorm();
        const double norm = std::sqrt(norm_sq);
        if (norm > config.grad_clip) {
          for (auto* g : grads) *g *= config.grad_clip / norm;
        }
      }
      ++step;
      auto weights = params.tensors();
      if (config.optimizer == Optimizer::Sgd) {
        for (std::size_t k = 0; k < weights.size(); ++k) *weights[k] -= config.learning_rate * *grads[k];
      } else {
        auto ms = m.tensors();
        auto vs = v.tensors();
        const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
        for (std::size_t k = 0; k < weights.size(); ++k) {
          *ms[k] = config.beta1 * *ms[k] + (1.0 - config.beta1) * *grads[k];
          *vs[k] = config.beta2 * *vs[k] + (1.0 - config.beta2) * grads[k]->cwiseAbs2();
          weights[k]->array() -=
              config.learning_rate * (ms[k]->array() / c1) / ((vs[k]->array() / c2).sqrt() + config.adam_eps);
        }
      }
    }
    result.loss_curve.push_back(epoch_tokens ? epoch_nll / static_cast<double>(epoch_tokens) : 0.0);
  }
  return result;
}

Sentence translate(const Seq2SeqParams& params, const Sentence& src, const ApeVocab& vocab, std::size_t max_len) {
  Sentence out;
  if (max_len == 0) return out;
  const Context ctx = encode(params, vocab.encode(src));
  DecoderState state = initial_state(ctx);
  TokenId prev = ApeVocab::kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto step = decode_step(params, prev, state, ctx);
    Eigen::Index best = 0;
    step.logits.maxCoeff(&best);
    const auto token = static_cast<TokenId>(best);
    if (token == ApeVocab::kEos) break;
    if (token == ApeVocab::kUnk) {
      if (t < src.size()) out.push_back(src[t]);
    } else if (token != ApeVocab::kBos && token != ApeVocab::kPad) {
      out.push_back(vocab.word(token));
    }
    prev = token;
    state = step.state;
  }
  return out;
}

namespace {

const char* optimizer_name(Optimizer o) { return o == Optimizer::Sgd ? "sgd" : "adam"; }

}  // namespace

std::string write_model(const ApeModel& model) {
  std::ostringstream out;
  out.precision(17);
  const auto& c = model.config;
  out << "hmt-ape-model 1\n";
  out << "config d " << c.d << "\n";
  out << "config max_vocab " << c.max_vocab << "\n";
  out << "config epochs " << c.epochs << "\n";
  out << "config batch_size " << c.batch_size << "\n";
  out << "config learning_rate " << c.learning_rate << "\n";
  out << "config optimizer " << optimizer_name(c.optimizer) << "\n";
  out << "config grad_clip " << c.grad_clip << "\n";
  out << "config seed " << c.seed << "\n";
  out << "config max_len " << c.max_len << "\n";
  out << "vocab " << model.vocab.size() << "\n";
  for (std::size_t i = 0; i < model.vocab.size(); ++i) out << model.vocab.word(static_cast<TokenId>(i)) << "\n";
  const auto tensors = model.params.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto& t = *tensors[k];
    out << "tensor " << Seq2SeqParams::kTensorNames[k] << " " << t.rows() << " " << t.cols() << "\n";
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index col = 0; col < t.cols(); ++col) {
        if (col) out << ' ';
        out << t(r, col);
      }
      out << "\n";
    }
  }
  out << "end\n";
  return out.str();
}

ApeModel read_model(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  std::string line;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line)) throw ParseError("unexpected end of model file", line_no + 1);
    ++line_no;
    return line;
  };
  if (next_line() != "hmt-ape-model 1") throw ParseError("not an APE model file (bad header)", line_no);

  ApeModel model;
  std::string key;
  for (;;) {
    std::istringstream fields(next_line());
    fields >> key;
    if (key != "config") break;
    std::string name;
    std::string value;
    fields >> name >> value;
    auto& c = model.config;
    try {
      if (name == "d") c.d = std::stoul(value);
      else if (name == "max_vocab") c.max_vocab = std::stoul(value);
      else if (name == "epochs") c.epochs = std::stoi(value);
      else if (name == "batch_size") c.batch_size = std::stoul(value);
      else if (name == "learning_rate") c.learning_rate = std::stod(value);
      else if (name == "optimizer") c.optimizer = value == "sgd" ? Optimizer::Sgd : Optimizer::Adam;
      else if (name == "grad_clip") c.grad_clip = std::stod(value);
      else if (name == "seed") c.seed = std::stoull(value);
      else if (name == "max_len") c.max_len = std::stoul(value);
      else throw ParseError("unknown config key '" + name + "'", line_no);
    } catch (const std::logic_error&) {
      throw ParseError("bad value for config key '" + name + "'", line_no);
    }
  }
  if (key != "vocab") throw ParseError("expected vocab section", line_no);
  std::size_t vocab_size = 0;
  {
    std::istringstream fields(line);
    fields >> key >> vocab_size;
  }
  for (std::size_t i = 0; i < vocab_size; ++i) {
    const auto& word = next_line();
    if (i < 4) {
      if (model.vocab.word(static_cast<TokenId>(i)) != word) throw ParseError("reserved vocabulary entry mismatch", line_no);
    } else if (model.vocab.add(word) != i) {
      throw ParseError("duplicate vocabulary entry '" + word + "'", line_no);
    }
  }
  auto tensors = model.params.tensors();
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    std::istringstream header(next_line());
    std::string tag;
    std::string name;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    header >> tag >> name >> rows >> cols;
    if (tag != "tensor" || name != Seq2SeqParams::kTensorNames[k]) {
      throw ParseError("expected tensor " + std::string(Seq2SeqParams::kTensorNames[k]), line_no);
    }
    MatrixXd& t = *tensors[k];
    t.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      std::istringstream values(next_line());
      for (Eigen::Index col = 0; col < cols; ++col) {
        std::string token;
        if (!(values >> token)) throw ParseError("tensor row too short", line_no);
        char* end = nullptr;
        t(r, col) = std::strtod(token.c_str(), &end);
        if (end != token.c_str() + token.size()) throw ParseError("bad tensor value '" + token + "'", line_no);
      }
    }
  }
  if (next_line() != "end") throw ParseError("missing end marker", line_no);
  const auto& p = model.params;
  const auto d = static_cast<Eigen::Index>(p.src_embed.rows());
  if (p.tgt_embed.rows() != d || p.encoder.input.rows() != 4 * d || p.decoder.input.cols() != 2 * d ||
      p.out_weight.rows() != d || p.out_weight.cols() != p.tgt_embed.cols() ||
      static_cast<std::size_t>(p.tgt_embed.cols()) != model.vocab.size()) {
    throw ParseError("tensor dimensions are inconsistent", line_no);
  }
  return model;
}

}  // namespace hmt::ape
