#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "hpt/metrics.hpp"
#include "hpt/model.hpp"
#include "hpt/trainer.hpp"

namespace hpt {

struct NeighborWord {
  std::string word;
  int id = 0;
  double similarity = 0.0;
};

/// Top-k vocabulary words by cosine similarity to the label's virtual label
/// word, reserved tokens excluded; ties go to the lower id. Throws UnknownLabel.
std::vector<NeighborWord> nearest_words(std::string_view label, const LabelHierarchy& hierarchy,
                                        const VerbalizerTable& verbalizers, const Matrix& embed_table,
                                        const Vocabulary& vocab, std::size_t k = 8);

/// floor(fraction * n) indices drawn uniformly without replacement, ascending.
/// Throws FractionOutOfRange unless 0 < fraction <= 1.
std::vector<std::size_t> sample_indices(std::size_t n, double fraction, std::uint64_t seed);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

MeanStd mean_std(std::span<const double> values);

struct LowResourceReport {
  double fraction = 1.0;
  std::size_t sample_size = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<RunMetrics> runs;
  MeanStd micro;
  MeanStd macro;
};

/// For seed s = config.seed + r (r < seeds), trains on a uniform subsample of
/// the training set and evaluates on the full test set.
LowResourceReport low_resource_run(const RunConfig& config, const LabelHierarchy& hierarchy, const Datasets& data,
                                   double fraction = 0.10, int seeds = 3, std::ostream* log = nullptr);

/// Machine-readable run report (JSON): config echo, per-epoch dev metrics,
/// final test metrics, per-label counts and cluster tables.
std::string run_report_json(std::string_view name, const RunConfig& config, const RunMetrics& metrics,
                            const LabelHierarchy& hierarchy);
std::string low_resource_report_json(const RunConfig& config, const LowResourceReport& report,
                                     const LabelHierarchy& hierarchy);
void write_text_file(const std::filesystem::path& path, std::string_view content);

/// Per-label statistics read back from a run report for cluster tables.
struct ReportLabels {
  LabelHierarchy hierarchy;
  std::vector<LabelCounts> per_label;
  std::vector<long> train_counts;
  MacroPolicy policy = MacroPolicy::kIncludeAll;
};

ReportLabels read_report_labels(const std::filesystem::path& report);

void print_run_summary(std::ostream& out, std::string_view name, const RunMetrics& metrics);
void print_clusters(std::ostream& out, const std::vector<Cluster>& clusters);

}  // namespace hpt
