#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hpt/hierarchy.hpp"

namespace hpt {

struct Example {
  std::string text;
  std::vector<std::string> labels;

  bool operator==(const Example&) const = default;
};

struct Datasets {
  std::vector<Example> train;
  std::vector<Example> dev;
  std::vector<Example> test;
};

/// One JSON object per line with `text` (string) and `labels` (array of
/// strings). Blank lines are skipped. Throws MalformedRecord (with the line
/// number) or UnknownLabel (naming the label).
std::vector<Example> load_corpus(const std::filesystem::path& path, const LabelHierarchy& hierarchy);
std::vector<Example> parse_corpus(std::string_view text, const LabelHierarchy& hierarchy);
void save_corpus(const std::filesystem::path& path, const std::vector<Example>& examples);
std::string corpus_to_string(const std::vector<Example>& examples);

struct SyntheticSpec {
  std::vector<int> branching{4, 3};  // children per node, one entry per layer
  int samples_per_leaf = 50;
  int keywords_per_label = 6;        // size of each label's private keyword set
  int keywords_per_example = 3;      // keywords drawn per label on the path
  int noise_vocabulary = 40;
  double noise_ratio = 0.5;          // fraction of an example's words that are noise
  std::uint64_t seed = 0;

  int depth() const noexcept { return static_cast<int>(branching.size()); }
  void validate() const;
};

struct SyntheticCorpus {
  std::vector<EdgeRecord> taxonomy;
  Datasets data;
};

/// Complete tree with the given branching; every label owns a disjoint keyword
/// set. An example for a leaf mixes keywords of each label on its path with
/// shared noise words and is labelled with the full path. Splits 70/15/15.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

/// Writes taxonomy.tsv, train.jsonl, dev.jsonl and test.jsonl under `dir`.
void write_dataset_dir(const std::filesystem::path& dir, const SyntheticCorpus& corpus);

struct DatasetFiles {
  std::filesystem::path taxonomy;
  std::filesystem::path train;
  std::filesystem::path dev;
  std::filesystem::path test;

  static DatasetFiles in_dir(const std::filesystem::path& dir);
};

struct LoadedDataset {
  LabelHierarchy hierarchy;
  Datasets data;
};

LoadedDataset load_dataset(const DatasetFiles& files);

}  // namespace hpt
