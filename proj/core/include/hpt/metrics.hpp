#pragma once

#include <span>
#include <string>
#include <vector>

#include "hpt/config.hpp"
#include "hpt/hierarchy.hpp"

namespace hpt {

struct LabelCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  long support() const noexcept { return tp + fn; }
  /// 2tp / (2tp + fp + fn); 0 when nothing was predicted or expected.
  double f1() const noexcept;
};

struct F1Scores {
  double micro = 0.0;
  double macro = 0.0;
};

/// Per-label confusion counts over `universe_size` labels (ids 0..n-1).
/// Throws LabelOutsideUniverse and DimensionMismatch (misaligned inputs).
std::vector<LabelCounts> confusion_counts(std::span<const std::vector<LabelId>> predictions,
                                          std::span<const std::vector<LabelId>> gold, std::size_t universe_size);

/// Micro from pooled counts, macro as the plain mean of per-label F1 over
/// `subset` (every label when empty). kExcludeAbsent drops labels with no gold
/// support from the macro mean.
F1Scores f1_from_counts(std::span<const LabelCounts> counts, std::span<const LabelId> subset = {},
                        MacroPolicy policy = MacroPolicy::kIncludeAll);

F1Scores micro_macro_f1(std::span<const std::vector<LabelId>> predictions, std::span<const std::vector<LabelId>> gold,
                        std::size_t universe_size, MacroPolicy policy = MacroPolicy::kIncludeAll);

struct Evaluation {
  F1Scores overall;
  std::vector<F1Scores> per_layer;  // index m-1
  std::vector<LabelCounts> per_label;
};

Evaluation evaluate(std::span<const std::vector<LabelId>> predictions, std::span<const std::vector<LabelId>> gold,
                    const LabelHierarchy& hierarchy, MacroPolicy policy = MacroPolicy::kIncludeAll);

/// Union over groups of labels scoring strictly above zero, ascending. With
/// `path_consistency`, a label survives only if all its ancestors do.
std::vector<LabelId> decode(std::span<const std::vector<double>> group_scores,
                            const std::vector<std::vector<LabelId>>& groups, const LabelHierarchy& hierarchy,
                            bool path_consistency = false);

enum class ClusterMode { kDepth, kFrequency };

struct Cluster {
  std::string name;
  std::vector<LabelId> labels;
  double macro_f1 = 0.0;
};

/// Depth mode: one cluster per tree depth. Frequency mode: labels ranked by
/// training count (descending, ties by id) and cut into quintiles named
/// ">80%", "60-80%", "40-60%", "20-40%", "<20%".
std::vector<Cluster> cluster_report(std::span<const LabelCounts> per_label, const LabelHierarchy& hierarchy,
                                    std::span<const long> train_counts, ClusterMode mode,
                                    MacroPolicy policy = MacroPolicy::kIncludeAll);

/// Training examples per label (after ancestor closure when requested).
std::vector<long> label_frequencies(std::span<const std::vector<LabelId>> gold, std::size_t universe_size);

}  // namespace hpt
