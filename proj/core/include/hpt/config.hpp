#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hpt/encoder.hpp"
#include "hpt/hierarchy.hpp"
#include "hpt/losses.hpp"

namespace hpt {

enum class ModelVariant { kHpt, kHard, kSoft, kFinetune };
enum class MacroPolicy { kIncludeAll, kExcludeAbsent };

std::string_view to_string(ModelVariant v) noexcept;
std::string_view to_string(MacroPolicy p) noexcept;

struct Ablations {
  bool no_injection = false;
  bool flat_template = false;
  bool bce_loss = false;
  bool no_mlm = false;
  ConnectionScheme connection = ConnectionScheme::kSameDepth;
};

/// Training and model hyperparameters. Defaults follow the published
/// protocol: batch 16, Adam at 3e-5, early stopping after 5 epochs without a
/// dev Macro-F1 gain, soft prompts of 8 words, one propagation layer.
struct RunConfig {
  int batch_size = 16;
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;
  int patience = 5;
  int max_epochs = 30;
  std::uint64_t seed = 0;

  ModelVariant variant = ModelVariant::kHpt;
  Ablations ablation;

  double mask_rate = 0.15;
  MaskPolicy mask_policy;
  bool ancestor_closure = true;
  bool path_consistency = false;
  MacroPolicy macro_policy = MacroPolicy::kIncludeAll;

  int structure_layers = 1;
  EncoderConfig encoder;
  int soft_template_length = 8;
  std::string hard_template = "the text is about";
  std::string verbalizer_map;

  /// Throws InvalidConfig on out-of-range values.
  void validate() const;
};

/// Names of the six ablation variants, each mapped onto the config.
const std::vector<std::string>& ablation_variant_names();
/// Throws InvalidConfig for an unknown variant name.
void apply_ablation_variant(RunConfig& config, std::string_view variant);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Every accepted dotted key, in manifest order.
const std::vector<std::string>& config_keys();
bool is_config_key(std::string_view key);
/// Throws InvalidConfig for unknown keys or unparsable values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& config, std::string_view key);
KeyValues to_key_values(const RunConfig& config);

/// `key=value` lines; blank lines and `#` comments ignored.
KeyValues parse_key_values(std::string_view text);
KeyValues load_key_values(const std::filesystem::path& path);
void save_key_values(const std::filesystem::path& path, const KeyValues& kv);
void apply_key_values(RunConfig& config, const KeyValues& kv);

inline constexpr std::string_view kToolkitVersion = "0.1.0";

}  // namespace hpt
