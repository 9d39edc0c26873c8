#include "hpt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hpt/error.hpp"

namespace hpt {

using nlohmann::json;

std::vector<NeighborWord> nearest_words(std::string_view label, const LabelHierarchy& hierarchy,
                                        const VerbalizerTable& verbalizers, const Matrix& embed_table,
                                        const Vocabulary& vocab, std::size_t k) {
  const LabelId id = hierarchy.id_of(label);
  const RowVector v = verbalizers.embeddings->value.row(id);
  const double vn = v.norm();
  std::vector<NeighborWord> all;
  for (int w = Vocabulary::kFirstWord; w < vocab.size(); ++w) {
    const double denom = vn * embed_table.row(w).norm();
    const double sim = denom > 0.0 ? v.dot(embed_table.row(w)) / denom : 0.0;
    all.push_back({vocab.word(w), w, sim});
  }
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(),
                    [](const NeighborWord& a, const NeighborWord& b) {
                      return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
                    });
  all.resize(take);
  return all;
}

std::vector<std::size_t> sample_indices(std::size_t n, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorKind::kFractionOutOfRange, "fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const auto count = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return out;
}

LowResourceReport low_resource_run(const RunConfig& config, const LabelHierarchy& hierarchy, const Datasets& data,
                                   double fraction, int seeds, std::ostream* log) {
  if (seeds < 1) throw Error(ErrorKind::kInvalidConfig, "need at least one seed");
  LowResourceReport report;
  report.fraction = fraction;
  std::vector<double> micro;
  std::vector<double> macro;
  for (int r = 0; r < seeds; ++r) {
    RunConfig cfg = config;
    cfg.seed = config.seed + static_cast<std::uint64_t>(r);
    const auto idx = sample_indices(data.train.size(), fraction, cfg.seed);
    Datasets sub;
    sub.dev = data.dev;
    sub.test = data.test;
    for (std::size_t i : idx) sub.train.push_back(data.train[i]);
    report.sample_size = sub.train.size();
    if (log != nullptr) *log << "low-resource run " << r + 1 << "/" << seeds << " seed " << cfg.seed << " on "
                             << sub.train.size() << " examples\n";
    auto result = train(cfg, hierarchy, sub, log);
    micro.push_back(result.metrics.test.overall.micro);
    macro.push_back(result.metrics.test.overall.macro);
    report.seeds.push_back(cfg.seed);
    report.runs.push_back(std::move(result.metrics));
  }
  report.micro = mean_std(micro);
  report.macro = mean_std(macro);
  return report;
}

namespace {

json f1_json(const F1Scores& f) { return {{"micro", f.micro}, {"macro", f.macro}}; }

json clusters_json(const std::vector<Cluster>& clusters, const LabelHierarchy& hier) {
  json arr = json::array();
  for (const auto& c : clusters) {
    json names = json::array();
    for (LabelId l : c.labels) names.push_back(hier.node(l).name);
    arr.push_back({{"name", c.name}, {"macro_f1", c.macro_f1}, {"labels", names}});
  }
  return arr;
}

json evaluation_json(const Evaluation& ev) {
  json layers = json::array();
  for (const auto& f : ev.per_layer) layers.push_back(f1_json(f));
  return {{"micro_f1", ev.overall.micro}, {"macro_f1", ev.overall.macro}, {"per_layer", layers}};
}

json metrics_json(const RunMetrics& m, const LabelHierarchy& hier) {
  json epochs = json::array();
  for (const auto& e : m.epochs) {
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"dev", f1_json(e.dev)}});
  }
  json labels = json::array();
  for (const auto& n : hier.nodes()) {
    const auto& c = m.test.per_label.at(static_cast<std::size_t>(n.id));
    labels.push_back({{"name", n.name},
                      {"parent", n.parent ? hier.node(*n.parent).name : std::string(kRootName)},
                      {"depth", n.depth},
                      {"tp", c.tp},
                      {"fp", c.fp},
                      {"fn", c.fn},
                      {"f1", c.f1()},
                      {"train_count", m.train_counts.empty() ? 0L : m.train_counts[static_cast<std::size_t>(n.id)]}});
  }
  return {{"best_epoch", m.best_epoch},
          {"train_size", m.train_size},
          {"seconds", m.seconds},
          {"epochs", epochs},
          {"dev", evaluation_json(m.dev)},
          {"test", evaluation_json(m.test)},
          {"labels", labels},
          {"clusters", {{"depth", clusters_json(m.depth_clusters, hier)},
                        {"frequency", clusters_json(m.frequency_clusters, hier)}}}};
}

json config_json(const RunConfig& config) {
  json c = json::object();
  for (const auto& [k, v] : to_key_values(config)) c[k] = v;
  c["toolkit.version"] = std::string(kToolkitVersion);
  return c;
}

}  // namespace

std::string run_report_json(std::string_view name, const RunConfig& config, const RunMetrics& metrics,
                            const LabelHierarchy& hierarchy) {
  json j = metrics_json(metrics, hierarchy);
  j["run"] = std::string(name);
  j["config"] = config_json(config);
  return j.dump(2) + "\n";
}

std::string low_resource_report_json(const RunConfig& config, const LowResourceReport& report,
                                     const LabelHierarchy& hierarchy) {
  json runs = json::array();
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    json r = metrics_json(report.runs[i], hierarchy);
    r["seed"] = report.seeds[i];
    runs.push_back(std::move(r));
  }
  json j = {{"run", "lowres"},
            {"config", config_json(config)},
            {"fraction", report.fraction},
            {"sample_size", report.sample_size},
            {"micro_f1", {{"mean", report.micro.mean}, {"std", report.micro.stddev}}},
            {"macro_f1", {{"mean", report.macro.mean}, {"std", report.macro.stddev}}},
            {"runs", runs}};
  return j.dump(2) + "\n";
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write '" + path.string() + "'");
  out << content;
}

ReportLabels read_report_labels(const std::filesystem::path& report) {
  std::ifstream in(report);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open report '" + report.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kMalformedRecord, report.string() + ": " + e.what());
  }
  if (!j.contains("labels") || !j["labels"].is_array()) {
    throw Error(ErrorKind::kMalformedRecord, report.string() + ": no per-label table");
  }
  std::vector<EdgeRecord> edges;
  for (const auto& l : j["labels"]) edges.push_back({l.at("parent").get<std::string>(), l.at("name").get<std::string>()});
  ReportLabels out;
  out.hierarchy = LabelHierarchy::from_records(edges);
  out.per_label.resize(out.hierarchy.size());
  out.train_counts.resize(out.hierarchy.size());
  for (const auto& l : j["labels"]) {
    const auto id = static_cast<std::size_t>(out.hierarchy.id_of(l.at("name").get<std::string>()));
    out.per_label[id] = {l.at("tp").get<long>(), l.at("fp").get<long>(), l.at("fn").get<long>()};
    out.train_counts[id] = l.at("train_count").get<long>();
  }
  if (j.contains("config") && j["config"].contains("eval.macro_policy") &&
      j["config"]["eval.macro_policy"] == "exclude-absent") {
    out.policy = MacroPolicy::kExcludeAbsent;
  }
  return out;
}

void print_run_summary(std::ostream& out, std::string_view name, const RunMetrics& m) {
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(4);
  out << "run " << name << ": best epoch " << m.best_epoch << ", " << m.epochs.size() << " epochs, "
      << m.train_size << " training examples, " << std::setprecision(1) << m.seconds << " s\n";
  out << std::setprecision(4);
  out << "  " << std::left << std::setw(10) << "split" << std::right << std::setw(10) << "micro-F1" << std::setw(10)
      << "macro-F1" << '\n';
  out << "  " << std::left << std::setw(10) << "dev" << std::right << std::setw(10) << m.dev.overall.micro
      << std::setw(10) << m.dev.overall.macro << '\n';
  out << "  " << std::left << std::setw(10) << "test" << std::right << std::setw(10) << m.test.overall.micro
      << std::setw(10) << m.test.overall.macro << '\n';
  for (std::size_t l = 0; l < m.test.per_layer.size(); ++l) {
    out << "  " << std::left << std::setw(10) << ("layer " + std::to_string(l + 1)) << std::right << std::setw(10)
        << m.test.per_layer[l].micro << std::setw(10) << m.test.per_layer[l].macro << '\n';
  }
  out.flags(flags);
}

void print_clusters(std::ostream& out, const std::vector<Cluster>& clusters) {
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(4);
  out << "  " << std::left << std::setw(12) << "cluster" << std::right << std::setw(8) << "labels" << std::setw(10)
      << "macro-F1" << '\n';
  for (const auto& c : clusters) {
    out << "  " << std::left << std::setw(12) << c.name << std::right << std::setw(8) << c.labels.size()
        << std::setw(10) << c.macro_f1 << '\n';
  }
  out.flags(flags);
}

}  // namespace hpt
