#include "hpt/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hpt/error.hpp"

namespace hpt {

std::vector<Example> parse_corpus(std::string_view text, const LabelHierarchy& hierarchy) {
  std::vector<Example> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorKind::kMalformedRecord, where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string() || !j.contains("labels") ||
        !j["labels"].is_array()) {
      throw Error(ErrorKind::kMalformedRecord, where + ": expected {\"text\": string, \"labels\": [string]}");
    }
    Example ex;
    ex.text = j["text"].get<std::string>();
    for (const auto& l : j["labels"]) {
      if (!l.is_string()) throw Error(ErrorKind::kMalformedRecord, where + ": label is not a string");
      auto name = l.get<std::string>();
      if (!hierarchy.find(name)) throw Error(ErrorKind::kUnknownLabel, "'" + name + "' at " + where);
      ex.labels.push_back(std::move(name));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Example> load_corpus(const std::filesystem::path& path, const LabelHierarchy& hierarchy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open corpus '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), hierarchy);
}

std::string corpus_to_string(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["text"] = ex.text;
    j["labels"] = ex.labels;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<Example>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write corpus '" + path.string() + "'");
  out << corpus_to_string(examples);
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kInvalidConfig, "synthetic spec: " + what); };
  if (branching.empty()) fail("depth must be >= 1");
  for (int b : branching) {
    if (b < 1) fail("branching must be >= 1");
  }
  if (samples_per_leaf < 0) fail("samples per leaf must be >= 0");
  if (keywords_per_label < 1 || keywords_per_example < 1) fail("keyword counts must be >= 1");
  if (!(noise_ratio >= 0.0 && noise_ratio < 1.0)) fail("noise ratio must be in [0, 1)");
  if (noise_ratio > 0.0 && noise_vocabulary < 1) fail("noise vocabulary must be >= 1");
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticCorpus corpus;

  // Breadth-first label creation; names encode layer and index ("l2n7").
  struct Label {
    std::string name;
    int parent;
  };
  std::vector<std::vector<Label>> layers(static_cast<std::size_t>(spec.depth()));
  for (int m = 0; m < spec.depth(); ++m) {
    const int parents = m == 0 ? 1 : static_cast<int>(layers[static_cast<std::size_t>(m - 1)].size());
    for (int p = 0; p < parents; ++p) {
      for (int c = 0; c < spec.branching[static_cast<std::size_t>(m)]; ++c) {
        auto& layer = layers[static_cast<std::size_t>(m)];
        Label l{"l" + std::to_string(m + 1) + "n" + std::to_string(layer.size()), m == 0 ? -1 : p};
        corpus.taxonomy.push_back(
            {m == 0 ? std::string(kRootName) : layers[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(p)].name,
             l.name});
        layer.push_back(std::move(l));
      }
    }
  }
  if (spec.samples_per_leaf == 0) return corpus;

  std::mt19937_64 rng(spec.seed);
  const int kw_per_example = std::min(spec.keywords_per_example, spec.keywords_per_label);
  const int path_keywords = kw_per_example * spec.depth();
  const int noise_words = static_cast<int>(
      std::lround(spec.noise_ratio / (1.0 - spec.noise_ratio) * static_cast<double>(path_keywords)));

  auto keyword = [](const std::string& label, int k) { return label + "w" + std::to_string(k); };

  std::vector<Example> all;
  const auto& leaves = layers.back();
  for (std::size_t leaf = 0; leaf < leaves.size(); ++leaf) {
    std::vector<std::string> path;
    int idx = static_cast<int>(leaf);
    for (int m = spec.depth() - 1; m >= 0; --m) {
      const auto& l = layers[static_cast<std::size_t>(m)][static_cast<std::size_t>(idx)];
      path.push_back(l.name);
      idx = l.parent;
    }
    std::reverse(path.begin(), path.end());

    for (int s = 0; s < spec.samples_per_leaf; ++s) {
      std::vector<std::string> words;
      for (const auto& label : path) {
        std::vector<int> pool(static_cast<std::size_t>(spec.keywords_per_label));
        std::iota(pool.begin(), pool.end(), 0);
        std::shuffle(pool.begin(), pool.end(), rng);
        for (int k = 0; k < kw_per_example; ++k) words.push_back(keyword(label, pool[static_cast<std::size_t>(k)]));
      }
      std::uniform_int_distribution<int> noise(0, std::max(0, spec.noise_vocabulary - 1));
      for (int k = 0; k < noise_words; ++k) words.push_back("noise" + std::to_string(noise(rng)));
      std::shuffle(words.begin(), words.end(), rng);
      Example ex;
      for (std::size_t w = 0; w < words.size(); ++w) ex.text += (w ? " " : "") + words[w];
      ex.labels = path;
      all.push_back(std::move(ex));
    }
  }

  std::shuffle(all.begin(), all.end(), rng);
  const std::size_t n = all.size();
  const auto n_train = static_cast<std::size_t>(std::llround(0.70 * static_cast<double>(n)));
  const auto n_dev = static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(n)));
  corpus.data.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  corpus.data.dev.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train),
                         all.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_dev)));
  corpus.data.test.assign(all.begin() + static_cast<std::ptrdiff_t>(std::min(n, n_train + n_dev)), all.end());
  return corpus;
}

DatasetFiles DatasetFiles::in_dir(const std::filesystem::path& dir) {
  return {dir / "taxonomy.tsv", dir / "train.jsonl", dir / "dev.jsonl", dir / "test.jsonl"};
}

void write_dataset_dir(const std::filesystem::path& dir, const SyntheticCorpus& corpus) {
  std::filesystem::create_directories(dir);
  const auto files = DatasetFiles::in_dir(dir);
  {
    std::ofstream out(files.taxonomy, std::ios::binary);
    if (!out) throw Error(ErrorKind::kIoError, "cannot write '" + files.taxonomy.string() + "'");
    out << "# parent<TAB>child\n";
    for (const auto& r : corpus.taxonomy) out << r.parent << '\t' << r.child << '\n';
  }
  save_corpus(files.train, corpus.data.train);
  save_corpus(files.dev, corpus.data.dev);
  save_corpus(files.test, corpus.data.test);
}

LoadedDataset load_dataset(const DatasetFiles& files) {
  LoadedDataset out;
  out.hierarchy = LabelHierarchy::load(files.taxonomy);
  out.data.train = load_corpus(files.train, out.hierarchy);
  out.data.dev = load_corpus(files.dev, out.hierarchy);
  out.data.test = load_corpus(files.test, out.hierarchy);
  return out;
}

}  // namespace hpt
