#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "hpt/config.hpp"
#include "hpt/data_io.hpp"
#include "hpt/metrics.hpp"
#include "hpt/model.hpp"

namespace hpt {

struct EncodedExample {
  std::vector<int> ids;
  std::vector<LabelId> labels;  // sorted, ancestor-closed when configured
};

/// Vocabulary over the training texts, label names and prompt words.
Vocabulary build_vocabulary(const Datasets& data, const LabelHierarchy& hierarchy, const RunConfig& config,
                            const HptModel::VerbalizerMap& verbalizers = {});

std::vector<EncodedExample> encode_examples(const HptModel& model, std::span<const Example> examples);

/// Loss of one example: per-group ZMLCE (or BCE) plus, when enabled, the
/// masked-LM cross entropy at masked text positions. `mask_seed` fixes the
/// masking plan.
Var example_loss(const HptModel& model, Tape& tape, const EncodedExample& example, std::uint64_t mask_seed);

/// Adam with bias correction.
class AdamOptimizer {
 public:
  AdamOptimizer(const ParameterStore& params, double lr, double beta1, double beta2, double eps);
  void step(ParameterStore& params, const Gradients& grads);
  long steps() const noexcept { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Owns the optimisation state of one model.
class Trainer {
 public:
  Trainer(HptModel& model, const RunConfig& config);

  /// One update on `batch`; returns the mean loss before the update. Throws
  /// DivergedLoss on a non-finite loss.
  double step(std::span<const EncodedExample> batch, std::uint64_t mask_seed);

  /// Mean-loss gradient of `batch` without updating.
  Gradients gradient(std::span<const EncodedExample> batch, std::uint64_t mask_seed, double* loss = nullptr) const;

 private:
  HptModel& model_;
  RunConfig config_;
  AdamOptimizer adam_;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  F1Scores dev;
};

struct RunMetrics {
  Evaluation test;
  Evaluation dev;  // at the selected epoch
  std::vector<EpochRecord> epochs;
  std::vector<double> step_losses;
  int best_epoch = 0;  // 0 = initial parameters
  std::vector<long> train_counts;
  std::vector<Cluster> depth_clusters;
  std::vector<Cluster> frequency_clusters;
  std::size_t train_size = 0;
  double seconds = 0.0;
};

struct TrainResult {
  std::unique_ptr<HptModel> model;
  RunMetrics metrics;
};

struct Predictions {
  std::vector<std::vector<LabelId>> predicted;
  std::vector<std::vector<LabelId>> gold;
};

Predictions predict(const HptModel& model, std::span<const Example> examples);
Evaluation evaluate_model(const HptModel& model, std::span<const Example> examples);

/// Trains every parameter end to end, evaluating dev Macro-F1 after each
/// epoch, keeping the best weights and stopping once `patience` epochs pass
/// without a gain. Throws EmptyDataset or DivergedLoss.
TrainResult train(const RunConfig& config, const LabelHierarchy& hierarchy, const Datasets& data,
                  std::ostream* log = nullptr, const HptModel::VerbalizerMap& verbalizers = {});

/// Fills test metrics and cluster tables for an already trained model.
void finalize_metrics(const HptModel& model, const Datasets& data, RunMetrics& metrics);

/// Deterministic 64-bit mix used to derive per-example seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace hpt
