#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "hpt/autograd.hpp"
#include "hpt/vocabulary.hpp"

namespace hpt {

struct EncoderConfig {
  int vocab_size = 0;
  int width = 64;
  int heads = 4;
  int feed_forward = 128;
  int layers = 2;
  int max_length = 128;
  bool positional = true;
  double init_std = 0.02;
};

/// Input rows for the encoder (token or injected embeddings, no positions yet)
/// and a PAD flag per row.
struct EmbeddedSequence {
  Var rows;
  std::vector<char> pad;

  std::size_t length() const noexcept { return pad.size(); }
};

struct HiddenStates {
  Var states;

  Eigen::Index length() const { return states.rows(); }
};

/// Seam for masked-language-model encoders. The built-in TransformerEncoder
/// implements it; a pretrained encoder plugs in behind the same calls.
class MaskedLanguageModel {
 public:
  virtual ~MaskedLanguageModel() = default;

  virtual const Vocabulary& vocabulary() const = 0;
  virtual int width() const = 0;
  virtual int max_length() const = 0;
  virtual std::vector<int> tokenize(std::string_view text, std::size_t max_tokens) const = 0;

  /// The V x d input embedding table.
  virtual Var token_table(Tape& tape) const = 0;
  /// Table rows for `ids`. Throws IdOutOfRange.
  virtual EmbeddedSequence embed_tokens(Tape& tape, std::span<const int> ids) const = 0;
  /// Contextual states, one row per input row. Throws LengthExceeded.
  virtual HiddenStates encode(Tape& tape, const EmbeddedSequence& seq) const = 0;
  /// Vocabulary scores for the requested rows. Throws PositionOutOfRange.
  virtual Var mlm_logits(Tape& tape, const HiddenStates& hidden, std::span<const int> positions) const = 0;
};

/// Post-LN transformer encoder with learned absolute positions and a masked-LM
/// head tied to the input embeddings. Positions are added inside encode(), so
/// every row of an EmbeddedSequence (including injected templates) receives
/// the embedding of its slot. No dropout: forward passes are deterministic.
class TransformerEncoder final : public MaskedLanguageModel {
 public:
  /// Registers freshly initialised `encoder.*` parameters in `store`.
  TransformerEncoder(const EncoderConfig& config, Vocabulary vocab, ParameterStore& store, std::mt19937_64& rng);
  /// Binds to `encoder.*` parameters already present in `store`.
  TransformerEncoder(const EncoderConfig& config, Vocabulary vocab, const ParameterStore& store);

  const EncoderConfig& config() const noexcept { return config_; }
  const Vocabulary& vocabulary() const override { return vocab_; }
  int width() const override { return config_.width; }
  int max_length() const override { return config_.max_length; }
  std::vector<int> tokenize(std::string_view text, std::size_t max_tokens) const override;

  Var token_table(Tape& tape) const override;
  EmbeddedSequence embed_tokens(Tape& tape, std::span<const int> ids) const override;
  HiddenStates encode(Tape& tape, const EmbeddedSequence& seq) const override;
  Var mlm_logits(Tape& tape, const HiddenStates& hidden, std::span<const int> positions) const override;

  const Parameter& token_embeddings() const { return *tokens_; }

 private:
  struct Block {
    const Parameter *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    const Parameter *ln1_g, *ln1_b;
    const Parameter *w1, *b1, *w2, *b2;
    const Parameter *ln2_g, *ln2_b;
  };

  void bind(const ParameterStore& store);
  static void validate(const EncoderConfig& config);

  EncoderConfig config_;
  Vocabulary vocab_;
  const Parameter* tokens_ = nullptr;
  const Parameter* positions_ = nullptr;
  const Parameter* emb_ln_g_ = nullptr;
  const Parameter* emb_ln_b_ = nullptr;
  std::vector<Block> blocks_;
  const Parameter* head_w_ = nullptr;
  const Parameter* head_b_ = nullptr;
  const Parameter* head_ln_g_ = nullptr;
  const Parameter* head_ln_b_ = nullptr;
  const Parameter* out_bias_ = nullptr;
};

/// N(0, std^2) matrix.
Matrix random_normal(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng);

}  // namespace hpt
