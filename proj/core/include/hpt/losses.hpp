#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hpt/autograd.hpp"

namespace hpt {

// Scores are raw (pre-sigmoid) label scores. `positives` holds indices into the
// score vector; every other index is a negative.

/// Zero-bounded multi-label cross entropy:
///   log(1 + sum_neg e^{s_i}) + log(1 + sum_pos e^{-s_j})
/// Each term is a log-sum-exp over {0} and the scores, so |s| > 700 is safe.
/// Throws NonFiniteScore.
double zmlce(std::span<const double> scores, std::span<const int> positives);
std::vector<double> zmlce_gradient(std::span<const double> scores, std::span<const int> positives);

/// Summed binary cross entropy over sigmoid(scores). Throws NonFiniteScore.
double bce_loss(std::span<const double> scores, std::span<const int> positives);
std::vector<double> bce_gradient(std::span<const double> scores, std::span<const int> positives);

/// Pairwise multi-label cross entropy log(1 + sum_neg sum_pos e^{s_i - s_j}).
/// Needs a non-empty proper subset of positives; throws EmptyPartition.
double mlce_reference(std::span<const double> scores, std::span<const int> positives);

/// -log softmax(scores)[target].
double softmax_cross_entropy(std::span<const double> scores, int target);

/// log(sum e^{x}) over `values` plus an implicit 0 entry.
double log1p_sum_exp(std::span<const double> values);

/// Per-layer scores with positives given as indices inside each layer's vector.
struct LayerScoreSet {
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<int>> positives;
};

/// Sum over layers of zmlce plus the masked-LM term. Throws LayerMismatch when
/// the set does not hold exactly `expected_layers` aligned layers.
double layerwise_total(const LayerScoreSet& set, double mlm_term, int expected_layers);

namespace ops {

/// zmlce over a 1 x n score row.
Var zmlce(Var scores, std::span<const int> positives);
/// bce_loss over a 1 x n score row.
Var bce(Var scores, std::span<const int> positives);
/// Mean softmax cross entropy over the rows of `logits` against `targets`.
Var softmax_cross_entropy(Var logits, std::span<const int> targets);

}  // namespace ops

enum class MaskReplacement : std::uint8_t { kMask, kRandom, kKeep };

struct MaskPolicy {
  double mask_prob = 0.8;
  double random_prob = 0.1;  // remainder keeps the original token
};

/// Positions (relative to the start of the text span) chosen for the masked-LM
/// objective, with the original ids and the replacement applied to each.
struct MaskingPlan {
  std::vector<int> positions;
  std::vector<int> original_ids;
  std::vector<MaskReplacement> replacement;

  bool empty() const noexcept { return positions.empty(); }
  /// Positions shifted into sequence coordinates given the text offset.
  std::vector<int> sequence_positions(int text_begin) const;
};

struct MaskingResult {
  MaskingPlan plan;
  std::vector<int> corrupted;
};

/// Picks ceil(rate * N) text positions without replacement. Random
/// replacements draw from [first_word_id, vocab_size).
MaskingResult mlm_masking(std::span<const int> text_ids, double rate, std::uint64_t seed, int mask_id,
                          int first_word_id, int vocab_size, MaskPolicy policy = {});

}  // namespace hpt
