#include "hpt/encoder.hpp"

#include <array>
#include <cmath>
#include <string>

#include "hpt/error.hpp"

namespace hpt {

Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  // Column-major fill order is part of the reproducibility contract.
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  }
  return m;
}

void TransformerEncoder::validate(const EncoderConfig& c) {
  if (c.vocab_size < Vocabulary::kFirstWord || c.width < 1 || c.heads < 1 || c.width % c.heads != 0 ||
      c.feed_forward < 1 || c.layers < 0 || c.max_length < 1) {
    throw Error(ErrorKind::kInvalidConfig, "encoder shape (vocab " + std::to_string(c.vocab_size) + ", width " +
                                               std::to_string(c.width) + ", heads " + std::to_string(c.heads) + ")");
  }
}

TransformerEncoder::TransformerEncoder(const EncoderConfig& config, Vocabulary vocab, ParameterStore& store,
                                       std::mt19937_64& rng)
    : config_(config), vocab_(std::move(vocab)) {
  config_.vocab_size = vocab_.size();
  validate(config_);
  const Eigen::Index d = config_.width;
  const Eigen::Index ff = config_.feed_forward;
  const double s = config_.init_std;
  auto ones = [](Eigen::Index n) { return Matrix::Ones(1, n); };
  auto zeros = [](Eigen::Index r, Eigen::Index c) { return Matrix::Zero(r, c); };

  store.add("encoder.tokens", random_normal(config_.vocab_size, d, s, rng));
  store.add("encoder.positions", random_normal(config_.max_length, d, s, rng));
  store.add("encoder.emb_ln.g", ones(d));
  store.add("encoder.emb_ln.b", zeros(1, d));
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "encoder.block" + std::to_string(l) + ".";
    for (const char* name : {"wq", "wk", "wv", "wo"}) {
      store.add(p + name, random_normal(d, d, s, rng));
      store.add(p + "b" + std::string(name).substr(1), zeros(1, d));
    }
    store.add(p + "ln1.g", ones(d));
    store.add(p + "ln1.b", zeros(1, d));
    store.add(p + "w1", random_normal(d, ff, s, rng));
    store.add(p + "b1", zeros(1, ff));
    store.add(p + "w2", random_normal(ff, d, s, rng));
    store.add(p + "b2", zeros(1, d));
    store.add(p + "ln2.g", ones(d));
    store.add(p + "ln2.b", zeros(1, d));
  }
  store.add("encoder.head.w", random_normal(d, d, s, rng));
  store.add("encoder.head.b", zeros(1, d));
  store.add("encoder.head_ln.g", ones(d));
  store.add("encoder.head_ln.b", zeros(1, d));
  store.add("encoder.out_bias", zeros(1, config_.vocab_size));
  bind(store);
}

TransformerEncoder::TransformerEncoder(const EncoderConfig& config, Vocabulary vocab, const ParameterStore& store)
    : config_(config), vocab_(std::move(vocab)) {
  config_.vocab_size = vocab_.size();
  validate(config_);
  bind(store);
}

void TransformerEncoder::bind(const ParameterStore& store) {
  tokens_ = &store.at("encoder.tokens");
  positions_ = &store.at("encoder.positions");
  if (tokens_->value.rows() != config_.vocab_size || tokens_->value.cols() != config_.width ||
      positions_->value.rows() != config_.max_length) {
    throw Error(ErrorKind::kDimensionMismatch, "encoder parameters do not match the configuration");
  }
  emb_ln_g_ = &store.at("encoder.emb_ln.g");
  emb_ln_b_ = &store.at("encoder.emb_ln.b");
  blocks_.clear();
  for (int l = 0; l < config_.layers; ++l) {
    const std::string p = "encoder.block" + std::to_string(l) + ".";
    auto at = [&](const char* n) { return &store.at(p + n); };
    blocks_.push_back(Block{at("wq"), at("bq"), at("wk"), at("bk"), at("wv"), at("bv"), at("wo"), at("bo"),
                            at("ln1.g"), at("ln1.b"), at("w1"), at("b1"), at("w2"), at("b2"), at("ln2.g"),
                            at("ln2.b")});
  }
  head_w_ = &store.at("encoder.head.w");
  head_b_ = &store.at("encoder.head.b");
  head_ln_g_ = &store.at("encoder.head_ln.g");
  head_ln_b_ = &store.at("encoder.head_ln.b");
  out_bias_ = &store.at("encoder.out_bias");
}

std::vector<int> TransformerEncoder::tokenize(std::string_view text, std::size_t max_tokens) const {
  return hpt::tokenize(text, vocab_, max_tokens);
}

Var TransformerEncoder::token_table(Tape& tape) const { return tape.param(*tokens_); }

EmbeddedSequence TransformerEncoder::embed_tokens(Tape& tape, std::span<const int> ids) const {
  EmbeddedSequence seq;
  seq.rows = ops::gather_rows(token_table(tape), ids);
  seq.pad.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) seq.pad[i] = ids[i] == Vocabulary::kPad ? 1 : 0;
  return seq;
}

namespace {

Var linear(Tape& tape, Var x, const Parameter& w, const Parameter& b) {
  return ops::add_row(ops::matmul(x, tape.param(w)), tape.param(b));
}

}  // namespace

HiddenStates TransformerEncoder::encode(Tape& tape, const EmbeddedSequence& seq) const {
  const auto m = static_cast<Eigen::Index>(seq.length());
  if (m > config_.max_length) {
    throw Error(ErrorKind::kLengthExceeded, std::to_string(m) + " rows exceed max length " +
                                                std::to_string(config_.max_length));
  }
  if (seq.rows.rows() != m || seq.rows.cols() != config_.width) {
    throw Error(ErrorKind::kDimensionMismatch, "embedded sequence shape");
  }
  if (m == 0) return {seq.rows};

  Var x = seq.rows;
  if (config_.positional) x = ops::add(x, ops::slice_rows(tape.param(*positions_), 0, m));
  x = ops::layer_norm(x, tape.param(*emb_ln_g_), tape.param(*emb_ln_b_));

  bool any_pad = false;
  Matrix key_mask = Matrix::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (seq.pad[static_cast<std::size_t>(j)]) {
      key_mask.col(j).setConstant(-1e9);
      any_pad = true;
    }
  }
  const Var mask = tape.constant(std::move(key_mask));

  const Eigen::Index head_dim = config_.width / config_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (const Block& b : blocks_) {
    const Var q = linear(tape, x, *b.wq, *b.bq);
    const Var k = linear(tape, x, *b.wk, *b.bk);
    const Var v = linear(tape, x, *b.wv, *b.bv);
    std::vector<Var> heads;
    heads.reserve(static_cast<std::size_t>(config_.heads));
    for (int h = 0; h < config_.heads; ++h) {
      const Eigen::Index off = h * head_dim;
      Var scores = ops::scale(ops::matmul_nt(ops::slice_cols(q, off, head_dim), ops::slice_cols(k, off, head_dim)),
                              inv_sqrt);
      if (any_pad) scores = ops::add(scores, mask);
      heads.push_back(ops::matmul(ops::softmax_rows(scores), ops::slice_cols(v, off, head_dim)));
    }
    const Var attn = linear(tape, ops::concat_cols(heads), *b.wo, *b.bo);
    x = ops::layer_norm(ops::add(x, attn), tape.param(*b.ln1_g), tape.param(*b.ln1_b));
    const Var ff = linear(tape, ops::gelu(linear(tape, x, *b.w1, *b.b1)), *b.w2, *b.b2);
    x = ops::layer_norm(ops::add(x, ff), tape.param(*b.ln2_g), tape.param(*b.ln2_b));
  }
  return {x};
}

Var TransformerEncoder::mlm_logits(Tape& tape, const HiddenStates& hidden, std::span<const int> positions) const {
  for (int p : positions) {
    if (p < 0 || p >= hidden.length()) {
      throw Error(ErrorKind::kPositionOutOfRange, "position " + std::to_string(p) + " outside " +
                                                      std::to_string(hidden.length()) + " states");
    }
  }
  if (positions.empty()) return tape.constant(Matrix(0, config_.vocab_size));
  const Var picked = ops::gather_rows(hidden.states, positions);
  const Var t = ops::layer_norm(ops::gelu(linear(tape, picked, *head_w_, *head_b_)), tape.param(*head_ln_g_),
                                tape.param(*head_ln_b_));
  return ops::add_row(ops::matmul_nt(t, token_table(tape)), tape.param(*out_bias_));
}

}  // namespace hpt
