#include "hpt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "hpt/error.hpp"

namespace hpt {
namespace {

void check_finite(std::span<const double> scores) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw Error(ErrorKind::kNonFiniteScore, "score " + std::to_string(i) + " is not finite");
    }
  }
}

std::vector<char> positive_mask(std::size_t n, std::span<const int> positives) {
  std::vector<char> mask(n, 0);
  for (int p : positives) {
    if (p < 0 || static_cast<std::size_t>(p) >= n) {
      throw Error(ErrorKind::kUnknownLabel, "positive index " + std::to_string(p) + " outside " + std::to_string(n) +
                                                " scores");
    }
    mask[static_cast<std::size_t>(p)] = 1;
  }
  return mask;
}

// Stable log(1 + e^x).
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

double log1p_sum_exp(std::span<const double> values) {
  double m = 0.0;
  for (double v : values) m = std::max(m, v);
  double acc = std::exp(-m);
  for (double v : values) acc += std::exp(v - m);
  return m + std::log(acc);
}

double zmlce(std::span<const double> scores, std::span<const int> positives) {
  check_finite(scores);
  const auto mask = positive_mask(scores.size(), positives);
  std::vector<double> neg;
  std::vector<double> pos;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) {
      pos.push_back(-scores[i]);
    } else {
      neg.push_back(scores[i]);
    }
  }
  return log1p_sum_exp(neg) + log1p_sum_exp(pos);
}

std::vector<double> zmlce_gradient(std::span<const double> scores, std::span<const int> positives) {
  check_finite(scores);
  const auto mask = positive_mask(scores.size(), positives);
  // d/ds of log(1 + sum e^{x}) is softmax over {0} u {x}, dropping the anchor.
  double neg_max = 0.0;
  double pos_max = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) {
      pos_max = std::max(pos_max, -scores[i]);
    } else {
      neg_max = std::max(neg_max, scores[i]);
    }
  }
  double neg_z = std::exp(-neg_max);
  double pos_z = std::exp(-pos_max);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) {
      pos_z += std::exp(-scores[i] - pos_max);
    } else {
      neg_z += std::exp(scores[i] - neg_max);
    }
  }
  std::vector<double> grad(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    grad[i] = mask[i] ? -std::exp(-scores[i] - pos_max) / pos_z : std::exp(scores[i] - neg_max) / neg_z;
  }
  return grad;
}

double bce_loss(std::span<const double> scores, std::span<const int> positives) {
  check_finite(scores);
  const auto mask = positive_mask(scores.size(), positives);
  double total = 0.0;
  // -log sigmoid(s) = softplus(-s); -log(1 - sigmoid(s)) = softplus(s).
  for (std::size_t i = 0; i < scores.size(); ++i) total += mask[i] ? softplus(-scores[i]) : softplus(scores[i]);
  return total;
}

std::vector<double> bce_gradient(std::span<const double> scores, std::span<const int> positives) {
  check_finite(scores);
  const auto mask = positive_mask(scores.size(), positives);
  std::vector<double> grad(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) grad[i] = sigmoid(scores[i]) - (mask[i] ? 1.0 : 0.0);
  return grad;
}

double mlce_reference(std::span<const double> scores, std::span<const int> positives) {
  check_finite(scores);
  const auto mask = positive_mask(scores.size(), positives);
  const auto n_pos = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1));
  if (n_pos == 0 || n_pos == scores.size()) {
    throw Error(ErrorKind::kEmptyPartition, "needs at least one positive and one negative");
  }
  std::vector<double> diffs;
  diffs.reserve(n_pos * (scores.size() - n_pos));
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (mask[j]) diffs.push_back(scores[i] - scores[j]);
    }
  }
  return log1p_sum_exp(diffs);
}

double softmax_cross_entropy(std::span<const double> scores, int target) {
  check_finite(scores);
  if (target < 0 || static_cast<std::size_t>(target) >= scores.size()) {
    throw Error(ErrorKind::kIdOutOfRange, "target " + std::to_string(target));
  }
  const double m = *std::max_element(scores.begin(), scores.end());
  double z = 0.0;
  for (double s : scores) z += std::exp(s - m);
  return m + std::log(z) - scores[static_cast<std::size_t>(target)];
}

double layerwise_total(const LayerScoreSet& set, double mlm_term, int expected_layers) {
  if (set.scores.size() != set.positives.size() || static_cast<int>(set.scores.size()) != expected_layers) {
    throw Error(ErrorKind::kLayerMismatch, "expected " + std::to_string(expected_layers) + " layers, got " +
                                               std::to_string(set.scores.size()) + " score / " +
                                               std::to_string(set.positives.size()) + " positive sets");
  }
  double total = mlm_term;
  for (std::size_t m = 0; m < set.scores.size(); ++m) total += zmlce(set.scores[m], set.positives[m]);
  return total;
}

namespace ops {
namespace {

std::span<const double> row_span(const Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }

Var score_loss(Var scores, std::span<const int> positives, double value, std::vector<double> grad) {
  const int is = scores.id();
  Matrix out(1, 1);
  out(0, 0) = value;
  return scores.tape()->push(std::move(out), {is}, [is, grad = std::move(grad)](Tape& tp, int self) {
    const double g = tp.grad(self)(0, 0);
    Matrix& gs = tp.grad_slot(is);
    for (std::size_t i = 0; i < grad.size(); ++i) gs(0, static_cast<Eigen::Index>(i)) += g * grad[i];
  });
}

void check_row(Var scores) {
  if (scores.rows() != 1) throw Error(ErrorKind::kDimensionMismatch, "score losses take a 1 x n row");
}

}  // namespace

Var zmlce(Var scores, std::span<const int> positives) {
  check_row(scores);
  const auto s = row_span(scores.value());
  return score_loss(scores, positives, hpt::zmlce(s, positives), zmlce_gradient(s, positives));
}

Var bce(Var scores, std::span<const int> positives) {
  check_row(scores);
  const auto s = row_span(scores.value());
  return score_loss(scores, positives, bce_loss(s, positives), bce_gradient(s, positives));
}

Var softmax_cross_entropy(Var logits, std::span<const int> targets) {
  const Matrix& v = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != v.rows() || targets.empty()) {
    throw Error(ErrorKind::kDimensionMismatch, "one target per logit row");
  }
  const double inv = 1.0 / static_cast<double>(targets.size());
  Matrix probs(v.rows(), v.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const int t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= v.cols()) throw Error(ErrorKind::kIdOutOfRange, "target " + std::to_string(t));
    if (!v.row(r).allFinite()) throw Error(ErrorKind::kNonFiniteScore, "masked-LM logits");
    const double m = v.row(r).maxCoeff();
    probs.row(r) = (v.row(r).array() - m).exp();
    const double z = probs.row(r).sum();
    probs.row(r) /= z;
    total += m + std::log(z) - v(r, t);
  }
  for (Eigen::Index r = 0; r < v.rows(); ++r) probs(r, targets[static_cast<std::size_t>(r)]) -= 1.0;
  probs *= inv;
  Matrix out(1, 1);
  out(0, 0) = total * inv;
  const int il = logits.id();
  return logits.tape()->push(std::move(out), {il}, [il, probs = std::move(probs)](Tape& tp, int self) {
    tp.grad_slot(il) += tp.grad(self)(0, 0) * probs;
  });
}

}  // namespace ops

std::vector<int> MaskingPlan::sequence_positions(int text_begin) const {
  std::vector<int> out(positions.size());
  std::transform(positions.begin(), positions.end(), out.begin(), [text_begin](int p) { return p + text_begin; });
  return out;
}

MaskingResult mlm_masking(std::span<const int> text_ids, double rate, std::uint64_t seed, int mask_id,
                          int first_word_id, int vocab_size, MaskPolicy policy) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw Error(ErrorKind::kInvalidConfig, "mask rate outside [0, 1]");
  MaskingResult result;
  result.corrupted.assign(text_ids.begin(), text_ids.end());
  const std::size_t n = text_ids.size();
  const auto count = std::min(n, static_cast<std::size_t>(std::ceil(rate * static_cast<double>(n) - 1e-9)));
  if (count == 0) return result;

  std::mt19937_64 rng(seed);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first `count` entries are a uniform sample.
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<int> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  std::sort(chosen.begin(), chosen.end());

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const bool can_randomise = vocab_size > first_word_id;
  std::uniform_int_distribution<int> random_word(first_word_id, can_randomise ? vocab_size - 1 : first_word_id);
  for (int p : chosen) {
    const double u = coin(rng);
    MaskReplacement kind = MaskReplacement::kKeep;
    if (u < policy.mask_prob) {
      kind = MaskReplacement::kMask;
      result.corrupted[static_cast<std::size_t>(p)] = mask_id;
    } else if (u < policy.mask_prob + policy.random_prob && can_randomise) {
      kind = MaskReplacement::kRandom;
      result.corrupted[static_cast<std::size_t>(p)] = random_word(rng);
    }
    result.plan.positions.push_back(p);
    result.plan.original_ids.push_back(text_ids[static_cast<std::size_t>(p)]);
    result.plan.replacement.push_back(kind);
  }
  return result;
}

}  // namespace hpt
