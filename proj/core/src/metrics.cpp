#include "hpt/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "hpt/error.hpp"

namespace hpt {

double LabelCounts::f1() const noexcept {
  const long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
}

std::vector<LabelCounts> confusion_counts(std::span<const std::vector<LabelId>> predictions,
                                          std::span<const std::vector<LabelId>> gold, std::size_t universe_size) {
  if (predictions.size() != gold.size()) {
    throw Error(ErrorKind::kDimensionMismatch, std::to_string(predictions.size()) + " predictions for " +
                                                   std::to_string(gold.size()) + " gold sets");
  }
  std::vector<LabelCounts> counts(universe_size);
  auto to_set = [universe_size](const std::vector<LabelId>& labels) {
    std::set<LabelId> s;
    for (LabelId l : labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= universe_size) {
        throw Error(ErrorKind::kLabelOutsideUniverse, "label id " + std::to_string(l));
      }
      s.insert(l);
    }
    return s;
  };
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto p = to_set(predictions[i]);
    const auto g = to_set(gold[i]);
    for (LabelId l : p) {
      if (g.contains(l)) {
        ++counts[static_cast<std::size_t>(l)].tp;
      } else {
        ++counts[static_cast<std::size_t>(l)].fp;
      }
    }
    for (LabelId l : g) {
      if (!p.contains(l)) ++counts[static_cast<std::size_t>(l)].fn;
    }
  }
  return counts;
}

F1Scores f1_from_counts(std::span<const LabelCounts> counts, std::span<const LabelId> subset, MacroPolicy policy) {
  std::vector<LabelId> ids(subset.begin(), subset.end());
  if (ids.empty()) {
    ids.resize(counts.size());
    std::iota(ids.begin(), ids.end(), 0);
  }
  long tp = 0;
  long fp = 0;
  long fn = 0;
  double f1_sum = 0.0;
  std::size_t f1_n = 0;
  for (LabelId l : ids) {
    const auto& c = counts[static_cast<std::size_t>(l)];
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
    if (policy == MacroPolicy::kExcludeAbsent && c.support() == 0) continue;
    f1_sum += c.f1();
    ++f1_n;
  }
  F1Scores out;
  const long denom = 2 * tp + fp + fn;
  out.micro = denom == 0 ? 0.0 : static_cast<double>(2 * tp) / static_cast<double>(denom);
  out.macro = f1_n == 0 ? 0.0 : f1_sum / static_cast<double>(f1_n);
  return out;
}

F1Scores micro_macro_f1(std::span<const std::vector<LabelId>> predictions, std::span<const std::vector<LabelId>> gold,
                        std::size_t universe_size, MacroPolicy policy) {
  const auto counts = confusion_counts(predictions, gold, universe_size);
  return f1_from_counts(counts, {}, policy);
}

Evaluation evaluate(std::span<const std::vector<LabelId>> predictions, std::span<const std::vector<LabelId>> gold,
                    const LabelHierarchy& hierarchy, MacroPolicy policy) {
  Evaluation ev;
  ev.per_label = confusion_counts(predictions, gold, hierarchy.size());
  ev.overall = f1_from_counts(ev.per_label, {}, policy);
  for (int m = 1; m <= hierarchy.depth(); ++m) ev.per_layer.push_back(f1_from_counts(ev.per_label, hierarchy.layer(m), policy));
  return ev;
}

std::vector<LabelId> decode(std::span<const std::vector<double>> group_scores,
                            const std::vector<std::vector<LabelId>>& groups, const LabelHierarchy& hierarchy,
                            bool path_consistency) {
  if (group_scores.size() != groups.size()) {
    throw Error(ErrorKind::kLayerMismatch, std::to_string(group_scores.size()) + " score groups for " +
                                               std::to_string(groups.size()) + " label groups");
  }
  std::vector<char> picked(hierarchy.size(), 0);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (group_scores[g].size() != groups[g].size()) {
      throw Error(ErrorKind::kLayerMismatch, "score count differs from label count in group " + std::to_string(g));
    }
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      if (group_scores[g][i] > 0.0) picked[static_cast<std::size_t>(groups[g][i])] = 1;
    }
  }
  std::vector<LabelId> out;
  for (std::size_t l = 0; l < picked.size(); ++l) {
    if (!picked[l]) continue;
    if (path_consistency) {
      const auto path = hierarchy.path_to_root(static_cast<LabelId>(l));
      const bool ok = std::all_of(path.begin(), path.end(),
                                  [&picked](LabelId a) { return picked[static_cast<std::size_t>(a)] != 0; });
      if (!ok) continue;
    }
    out.push_back(static_cast<LabelId>(l));
  }
  return out;
}

std::vector<Cluster> cluster_report(std::span<const LabelCounts> per_label, const LabelHierarchy& hierarchy,
                                    std::span<const long> train_counts, ClusterMode mode, MacroPolicy policy) {
  std::vector<Cluster> clusters;
  if (mode == ClusterMode::kDepth) {
    for (int m = 1; m <= hierarchy.depth(); ++m) {
      Cluster c;
      c.name = "depth " + std::to_string(m);
      c.labels = hierarchy.layer(m);
      clusters.push_back(std::move(c));
    }
  } else {
    if (train_counts.size() != hierarchy.size()) {
      throw Error(ErrorKind::kDimensionMismatch, "one training count per label required");
    }
    std::vector<LabelId> order(hierarchy.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](LabelId a, LabelId b) {
      return train_counts[static_cast<std::size_t>(a)] > train_counts[static_cast<std::size_t>(b)];
    });
    static const char* kNames[] = {">80%", "60-80%", "40-60%", "20-40%", "<20%"};
    const std::size_t n = order.size();
    for (std::size_t q = 0; q < 5; ++q) {
      Cluster c;
      c.name = kNames[q];
      for (std::size_t i = q * n / 5; i < (q + 1) * n / 5; ++i) c.labels.push_back(order[i]);
      std::sort(c.labels.begin(), c.labels.end());
      clusters.push_back(std::move(c));
    }
  }
  for (auto& c : clusters) {
    double sum = 0.0;
    std::size_t k = 0;
    for (LabelId l : c.labels) {
      const auto& counts = per_label[static_cast<std::size_t>(l)];
      if (policy == MacroPolicy::kExcludeAbsent && counts.support() == 0) continue;
      sum += counts.f1();
      ++k;
    }
    c.macro_f1 = k == 0 ? 0.0 : sum / static_cast<double>(k);
  }
  return clusters;
}

std::vector<long> label_frequencies(std::span<const std::vector<LabelId>> gold, std::size_t universe_size) {
  std::vector<long> counts(universe_size, 0);
  for (const auto& g : gold) {
    std::set<LabelId> s(g.begin(), g.end());
    for (LabelId l : s) {
      if (l < 0 || static_cast<std::size_t>(l) >= universe_size) {
        throw Error(ErrorKind::kLabelOutsideUniverse, "label id " + std::to_string(l));
      }
      ++counts[static_cast<std::size_t>(l)];
    }
  }
  return counts;
}

}  // namespace hpt
