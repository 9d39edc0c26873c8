#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "hpt/analysis.hpp"
#include "hpt/checkpoint.hpp"
#include "hpt/error.hpp"

namespace hpt::cli {
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config_file;
  std::string data_dir;
  std::string out_dir;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool with_data) {
  cmd->add_option("--config", c.config_file, "key=value config file")->check(CLI::ExistingFile);
  if (with_data) cmd->add_option("--data", c.data_dir, "dataset directory")->required();
  cmd->add_option("--out", c.out_dir, "output directory");
}

void add_config_flags(CLI::App* cmd, Common& c, const std::vector<std::string>& keys) {
  for (const auto& key : keys) {
    auto* opt = cmd->add_option_function<std::string>(
        "--" + key, [&c, key](const std::string& v) { c.overrides[key] = v; }, "config override");
    opt->group("Config");
  }
  cmd->add_option_function<std::string>(
         "--seed", [&c](const std::string& v) { c.overrides["train.seed"] = v; }, "alias of --train.seed")
      ->group("Config");
}

/// Base config, then the file, then `variant`, then flags.
RunConfig resolve_config(const Common& c, std::string_view variant = {}) {
  RunConfig cfg;
  if (!c.config_file.empty()) apply_key_values(cfg, load_key_values(c.config_file));
  if (!variant.empty()) apply_ablation_variant(cfg, variant);
  for (const auto& [k, v] : c.overrides) set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

fs::path output_dir(const Common& c, std::string_view subcommand) {
  if (!c.out_dir.empty()) return c.out_dir;
  const char* root = std::getenv(kOutputRootEnv);
  return fs::path(root != nullptr && *root != '\0' ? root : "hpt-runs") / subcommand;
}

std::string join_command(const std::vector<std::string>& args) {
  std::string s = "hpt";
  for (const auto& a : args) {
    s += ' ';
    const bool quote = a.empty() || a.find_first_of(" \t\"'") != std::string::npos;
    s += quote ? "'" + a + "'" : a;
  }
  return s;
}

LoadedDataset load_data(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorKind::kIoError, "dataset directory '" + dir + "' not found");
  return load_dataset(DatasetFiles::in_dir(dir));
}

HptModel::VerbalizerMap verbalizers_for(const RunConfig& cfg) {
  if (cfg.variant != ModelVariant::kHard) return {};
  if (cfg.verbalizer_map.empty()) throw Error(ErrorKind::kMissingVerbalizerMap, "hard prompt needs --prompt.verbalizer_map");
  return load_verbalizer_map(cfg.verbalizer_map);
}

void write_manifest(const fs::path& dir, const RunConfig& cfg, KeyValues extra) {
  fs::create_directories(dir);
  save_key_values(dir / "manifest.txt", manifest_entries(cfg, extra));
}

void write_plain_manifest(const fs::path& dir, KeyValues kv) {
  fs::create_directories(dir);
  kv.emplace_back("toolkit.version", std::string(kToolkitVersion));
  save_key_values(dir / "manifest.txt", kv);
}

ClusterMode parse_mode(const std::string& m) {
  if (m == "depth") return ClusterMode::kDepth;
  if (m == "frequency") return ClusterMode::kFrequency;
  throw Error(ErrorKind::kInvalidConfig, "unknown cluster mode '" + m + "' (depth or frequency)");
}

std::vector<int> parse_branching(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kInvalidConfig, "bad branching '" + s + "'");
    }
  }
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string branching_string(const std::vector<int>& b) {
  std::string s;
  for (std::size_t i = 0; i < b.size(); ++i) s += (i ? "," : "") + std::to_string(b[i]);
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchy-aware prompt tuning toolkit", "hpt"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  const auto& all_keys = config_keys();
  const std::vector<std::string> eval_keys{"decode.path_consistency", "eval.macro_policy"};

  Common train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint and metrics report");
  add_common(train_cmd, train_opts, true);
  add_config_flags(train_cmd, train_opts, all_keys);

  Common eval_opts;
  std::string eval_checkpoint;
  std::string eval_test;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a test file");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval_cmd->add_option("--test", eval_test, "test corpus (JSONL); defaults to <data>/test.jsonl");
  eval_cmd->add_option("--data", eval_opts.data_dir, "dataset directory (train split gives label frequencies)");
  eval_cmd->add_option("--out", eval_opts.out_dir, "output directory");
  for (const auto& key : eval_keys) {
    eval_cmd->add_option_function<std::string>(
        "--" + key, [&eval_opts, key](const std::string& v) { eval_opts.overrides[key] = v; }, "config override");
  }

  Common ablate_opts;
  std::string variant;
  auto* ablate_cmd = app.add_subcommand("ablate", "train one named ablation variant");
  ablate_cmd->add_option("--variant", variant, "ablation variant")
      ->required()
      ->check(CLI::IsMember(ablation_variant_names()));
  add_common(ablate_cmd, ablate_opts, true);
  add_config_flags(ablate_cmd, ablate_opts, all_keys);

  SyntheticSpec synth;
  std::string synth_branching = branching_string(synth.branching);
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic hierarchical corpus");
  synth_cmd->add_option("--synth.branching", synth_branching, "children per node by layer, comma separated")
      ->capture_default_str();
  synth_cmd->add_option("--synth.samples_per_leaf", synth.samples_per_leaf)->capture_default_str();
  synth_cmd->add_option("--synth.keywords_per_label", synth.keywords_per_label)->capture_default_str();
  synth_cmd->add_option("--synth.keywords_per_example", synth.keywords_per_example)->capture_default_str();
  synth_cmd->add_option("--synth.noise_vocabulary", synth.noise_vocabulary)->capture_default_str();
  synth_cmd->add_option("--synth.noise_ratio", synth.noise_ratio)->capture_default_str();
  synth_cmd->add_option("--synth.seed,--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "dataset directory to write");

  std::string nb_checkpoint;
  std::string nb_label;
  std::size_t nb_k = 8;
  std::string nb_out;
  auto* nb_cmd = app.add_subcommand("neighbors", "nearest vocabulary words of a label's virtual label word");
  nb_cmd->add_option("--checkpoint", nb_checkpoint)->required()->check(CLI::ExistingDirectory);
  nb_cmd->add_option("--label", nb_label)->required();
  nb_cmd->add_option("--k", nb_k)->capture_default_str()->check(CLI::PositiveNumber);
  nb_cmd->add_option("--out", nb_out, "also write neighbors.tsv here");

  std::string cl_report;
  std::string cl_mode = "depth";
  std::string cl_out;
  std::optional<std::string> cl_policy;
  auto* cl_cmd = app.add_subcommand("clusters", "macro-F1 by depth or training-frequency cluster");
  cl_cmd->add_option("--report", cl_report, "report.json from train, eval or ablate")->required()->check(CLI::ExistingFile);
  cl_cmd->add_option("--mode", cl_mode)->capture_default_str()->check(CLI::IsMember({"depth", "frequency"}));
  cl_cmd->add_option("--eval.macro_policy", cl_policy);
  cl_cmd->add_option("--out", cl_out, "also write clusters.tsv here");

  Common lr_opts;
  double fraction = 0.10;
  int seeds = 3;
  auto* lr_cmd = app.add_subcommand("lowres", "train on sampled fractions of the training set over several seeds");
  lr_cmd->add_option("--fraction", fraction)->capture_default_str();
  lr_cmd->add_option("--seeds", seeds)->capture_default_str()->check(CLI::PositiveNumber);
  add_common(lr_cmd, lr_opts, true);
  add_config_flags(lr_cmd, lr_opts, all_keys);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolkitVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "UsageError: " << e.what() << '\n';
    return 2;
  }

  const std::string command = join_command(args);
  try {
    if (*train_cmd || *ablate_cmd) {
      const bool ablate = static_cast<bool>(*ablate_cmd);
      const Common& c = ablate ? ablate_opts : train_opts;
      const RunConfig cfg = resolve_config(c, ablate ? variant : std::string_view{});
      const fs::path dir = output_dir(c, ablate ? "ablate-" + variant : "train");
      const auto dataset = load_data(c.data_dir);
      const auto verbalizers = verbalizers_for(cfg);
      auto result = train(cfg, dataset.hierarchy, dataset.data, &err, verbalizers);
      const std::string name = ablate ? variant : "train";
      KeyValues extra{{"command", command}, {"subcommand", ablate ? "ablate" : "train"}, {"data", c.data_dir}};
      if (ablate) extra.emplace_back("variant", variant);
      save_checkpoint(dir / "checkpoint", *result.model, extra);
      write_text_file(dir / "report.json", run_report_json(name, cfg, result.metrics, dataset.hierarchy));
      write_manifest(dir, cfg, extra);
      print_run_summary(out, name, result.metrics);
      out << "wrote " << dir.string() << '\n';
    } else if (*eval_cmd) {
      KeyValues overrides(eval_opts.overrides.begin(), eval_opts.overrides.end());
      auto ck = load_checkpoint(eval_checkpoint, overrides);
      const HptModel& model = *ck.model;
      if (eval_test.empty()) {
        if (eval_opts.data_dir.empty()) throw Error(ErrorKind::kInvalidConfig, "eval needs --test or --data");
        eval_test = DatasetFiles::in_dir(eval_opts.data_dir).test.string();
      }
      Datasets data;
      data.test = load_corpus(eval_test, model.hierarchy());
      if (data.test.empty()) throw Error(ErrorKind::kEmptyDataset, "test set is empty");
      if (!eval_opts.data_dir.empty()) data.train = load_corpus(DatasetFiles::in_dir(eval_opts.data_dir).train, model.hierarchy());
      RunMetrics metrics;
      metrics.train_size = data.train.size();
      finalize_metrics(model, data, metrics);
      metrics.dev = metrics.test;
      const fs::path dir = output_dir(eval_opts, "eval");
      write_text_file(dir / "report.json", run_report_json("eval", ck.config, metrics, model.hierarchy()));
      write_manifest(dir, ck.config,
                     {{"command", command}, {"subcommand", "eval"}, {"checkpoint", eval_checkpoint}, {"test", eval_test}});
      print_run_summary(out, "eval", metrics);
      out << "wrote " << dir.string() << '\n';
    } else if (*synth_cmd) {
      synth.branching = parse_branching(synth_branching);
      const auto corpus = generate_synthetic(synth);
      fs::path dir = synth_out.empty() ? output_dir(Common{}, "synth") : fs::path(synth_out);
      write_dataset_dir(dir, corpus);
      write_plain_manifest(dir, {{"command", command},
                                 {"subcommand", "synth"},
                                 {"synth.branching", branching_string(synth.branching)},
                                 {"synth.samples_per_leaf", std::to_string(synth.samples_per_leaf)},
                                 {"synth.keywords_per_label", std::to_string(synth.keywords_per_label)},
                                 {"synth.keywords_per_example", std::to_string(synth.keywords_per_example)},
                                 {"synth.noise_vocabulary", std::to_string(synth.noise_vocabulary)},
                                 {"synth.noise_ratio", format_double(synth.noise_ratio)},
                                 {"synth.seed", std::to_string(synth.seed)}});
      out << "wrote " << corpus.data.train.size() << "/" << corpus.data.dev.size() << "/" << corpus.data.test.size()
          << " train/dev/test examples over " << corpus.taxonomy.size() << " labels to " << dir.string() << '\n';
    } else if (*nb_cmd) {
      const auto ck = load_checkpoint(nb_checkpoint);
      const HptModel& model = *ck.model;
      if (model.kind() == PromptKind::kHard) {
        throw Error(ErrorKind::kMissingVerbalizerMap, "hard prompts have no learned label words");
      }
      const auto words = nearest_words(nb_label, model.hierarchy(), model.verbalizers(),
                                       model.encoder().token_embeddings().value, model.encoder().vocabulary(), nb_k);
      std::ostringstream table;
      table << "rank\tword\tsimilarity\n";
      for (std::size_t i = 0; i < words.size(); ++i) {
        table << i + 1 << '\t' << words[i].word << '\t' << std::fixed << std::setprecision(6) << words[i].similarity
              << '\n';
      }
      out << "nearest words to " << nb_label << ":\n" << table.str();
      if (!nb_out.empty()) {
        write_text_file(fs::path(nb_out) / "neighbors.tsv", table.str());
        write_plain_manifest(nb_out, {{"command", command},
                                      {"subcommand", "neighbors"},
                                      {"checkpoint", nb_checkpoint},
                                      {"label", nb_label},
                                      {"k", std::to_string(nb_k)}});
      }
    } else if (*cl_cmd) {
      auto labels = read_report_labels(cl_report);
      if (cl_policy) {
        RunConfig tmp;
        set_config_value(tmp, "eval.macro_policy", *cl_policy);
        labels.policy = tmp.macro_policy;
      }
      const auto clusters =
          cluster_report(labels.per_label, labels.hierarchy, labels.train_counts, parse_mode(cl_mode), labels.policy);
      out << cl_mode << " clusters (" << to_string(labels.policy) << "):\n";
      print_clusters(out, clusters);
      if (!cl_out.empty()) {
        std::ostringstream tsv;
        tsv << "cluster\tlabels\tmacro_f1\n";
        for (const auto& c : clusters) tsv << c.name << '\t' << c.labels.size() << '\t' << c.macro_f1 << '\n';
        write_text_file(fs::path(cl_out) / "clusters.tsv", tsv.str());
        write_plain_manifest(cl_out, {{"command", command},
                                      {"subcommand", "clusters"},
                                      {"report", cl_report},
                                      {"mode", cl_mode},
                                      {"eval.macro_policy", std::string(to_string(labels.policy))}});
      }
    } else if (*lr_cmd) {
      const RunConfig cfg = resolve_config(lr_opts);
      const auto dataset = load_data(lr_opts.data_dir);
      const fs::path dir = output_dir(lr_opts, "lowres");
      const auto report = low_resource_run(cfg, dataset.hierarchy, dataset.data, fraction, seeds, &err);
      write_text_file(dir / "report.json", low_resource_report_json(cfg, report, dataset.hierarchy));
      write_manifest(dir, cfg,
                     {{"command", command},
                      {"subcommand", "lowres"},
                      {"data", lr_opts.data_dir},
                      {"fraction", format_double(fraction)},
                      {"seeds", std::to_string(seeds)}});
      out << std::fixed << std::setprecision(4) << "low-resource " << fraction << " (" << report.sample_size
          << " examples, " << seeds << " seeds): micro-F1 " << report.micro.mean << " +/- " << report.micro.stddev
          << ", macro-F1 " << report.macro.mean << " +/- " << report.macro.stddev << '\n';
      out << "wrote " << dir.string() << '\n';
    }
  } catch (const Error& e) {
    err << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "IoError: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "InternalError: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace hpt::cli
