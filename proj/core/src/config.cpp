#include "hpt/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "hpt/error.hpp"

namespace hpt {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kCycleDetected: return "CycleDetected";
    case ErrorKind::kMultipleParents: return "MultipleParents";
    case ErrorKind::kDisconnected: return "Disconnected";
    case ErrorKind::kUnknownScheme: return "UnknownScheme";
    case ErrorKind::kUnknownLabel: return "UnknownLabel";
    case ErrorKind::kIdOutOfRange: return "IdOutOfRange";
    case ErrorKind::kLengthExceeded: return "LengthExceeded";
    case ErrorKind::kPositionOutOfRange: return "PositionOutOfRange";
    case ErrorKind::kTemplateOverflow: return "TemplateOverflow";
    case ErrorKind::kLayerOutOfRange: return "LayerOutOfRange";
    case ErrorKind::kMissingVerbalizerMap: return "MissingVerbalizerMap";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kMissingVirtualNode: return "MissingVirtualNode";
    case ErrorKind::kNonFiniteScore: return "NonFiniteScore";
    case ErrorKind::kLayerMismatch: return "LayerMismatch";
    case ErrorKind::kEmptyPartition: return "EmptyPartition";
    case ErrorKind::kDivergedLoss: return "DivergedLoss";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kLabelOutsideUniverse: return "LabelOutsideUniverse";
    case ErrorKind::kFractionOutOfRange: return "FractionOutOfRange";
    case ErrorKind::kMalformedRecord: return "MalformedRecord";
    case ErrorKind::kInvalidConfig: return "InvalidConfig";
    case ErrorKind::kIoError: return "IoError";
  }
  return "Error";
}

std::string_view to_string(ModelVariant v) noexcept {
  switch (v) {
    case ModelVariant::kHpt: return "hpt";
    case ModelVariant::kHard: return "hard";
    case ModelVariant::kSoft: return "soft";
    case ModelVariant::kFinetune: return "finetune";
  }
  return "unknown";
}

std::string_view to_string(MacroPolicy p) noexcept {
  return p == MacroPolicy::kIncludeAll ? "include-all" : "exclude-absent";
}

void RunConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::kInvalidConfig, what); };
  if (batch_size < 1) fail("train.batch_size must be >= 1");
  if (patience < 0) fail("train.patience must be >= 0");
  if (max_epochs < 0) fail("train.max_epochs must be >= 0");
  if (!(learning_rate > 0.0)) fail("train.learning_rate must be > 0");
  if (!(mask_rate >= 0.0 && mask_rate <= 1.0)) fail("mlm.rate must be in [0, 1]");
  if (mask_policy.mask_prob < 0.0 || mask_policy.random_prob < 0.0 ||
      mask_policy.mask_prob + mask_policy.random_prob > 1.0) {
    fail("mlm.mask_prob + mlm.random_prob must be within [0, 1]");
  }
  if (structure_layers < 1) fail("structure.layers must be >= 1");
  if (soft_template_length < 1) fail("prompt.soft_length must be >= 1");
  if (encoder.width < 1 || encoder.heads < 1 || encoder.width % encoder.heads != 0) {
    fail("encoder.width must be a positive multiple of encoder.heads");
  }
  if (encoder.layers < 0 || encoder.feed_forward < 1 || encoder.max_length < 4) fail("encoder shape");
}

const std::vector<std::string>& ablation_variant_names() {
  static const std::vector<std::string> names{"flat-template", "no-injection",      "bce-loss",
                                              "no-mlm",        "random-connection", "depth-increasing"};
  return names;
}

void apply_ablation_variant(RunConfig& config, std::string_view variant) {
  if (variant == "flat-template") {
    config.ablation.flat_template = true;
  } else if (variant == "no-injection") {
    config.ablation.no_injection = true;
  } else if (variant == "bce-loss") {
    config.ablation.bce_loss = true;
  } else if (variant == "no-mlm") {
    config.ablation.no_mlm = true;
  } else if (variant == "random-connection") {
    config.ablation.connection = ConnectionScheme::kRandom;
  } else if (variant == "depth-increasing") {
    config.ablation.connection = ConnectionScheme::kDepthIncreasing;
  } else {
    throw Error(ErrorKind::kInvalidConfig, "unknown ablation variant '" + std::string(variant) + "'");
  }
  config.variant = ModelVariant::kHpt;
}

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorKind::kInvalidConfig, "bad value '" + std::string(value) + "' for " + std::string(key));
}

template <class T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Field int_field(std::string key, T RunConfig::*member) {
  return {key, [member, key](RunConfig& c, std::string_view v) { c.*member = parse_number<T>(key, v); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(std::string key, double RunConfig::*member) {
  return {key, [member, key](RunConfig& c, std::string_view v) { c.*member = parse_number<double>(key, v); },
          [member](const RunConfig& c) { return format_double(c.*member); }};
}

Field bool_field(std::string key, std::function<bool&(RunConfig&)> ref) {
  return {key, [ref, key](RunConfig& c, std::string_view v) { ref(c) = parse_bool(key, v); },
          [ref](const RunConfig& c) { return ref(const_cast<RunConfig&>(c)) ? std::string("true") : std::string("false"); }};
}

Field encoder_int(std::string key, int EncoderConfig::*member) {
  return {key, [member, key](RunConfig& c, std::string_view v) { c.encoder.*member = parse_number<int>(key, v); },
          [member](const RunConfig& c) { return std::to_string(c.encoder.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(int_field("train.batch_size", &RunConfig::batch_size));
    f.push_back(double_field("train.learning_rate", &RunConfig::learning_rate));
    f.push_back(double_field("train.beta1", &RunConfig::beta1));
    f.push_back(double_field("train.beta2", &RunConfig::beta2));
    f.push_back(double_field("train.adam_eps", &RunConfig::adam_eps));
    f.push_back(double_field("train.clip_norm", &RunConfig::clip_norm));
    f.push_back(int_field("train.patience", &RunConfig::patience));
    f.push_back(int_field("train.max_epochs", &RunConfig::max_epochs));
    f.push_back(int_field("train.seed", &RunConfig::seed));
    f.push_back({"model.variant",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "hpt") c.variant = ModelVariant::kHpt;
                   else if (v == "hard") c.variant = ModelVariant::kHard;
                   else if (v == "soft") c.variant = ModelVariant::kSoft;
                   else if (v == "finetune") c.variant = ModelVariant::kFinetune;
                   else bad_value("model.variant", v);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.variant)); }});
    f.push_back(bool_field("ablation.no_injection", [](RunConfig& c) -> bool& { return c.ablation.no_injection; }));
    f.push_back(bool_field("ablation.flat_template", [](RunConfig& c) -> bool& { return c.ablation.flat_template; }));
    f.push_back(bool_field("ablation.bce_loss", [](RunConfig& c) -> bool& { return c.ablation.bce_loss; }));
    f.push_back(bool_field("ablation.no_mlm", [](RunConfig& c) -> bool& { return c.ablation.no_mlm; }));
    f.push_back({"ablation.connection",
                 [](RunConfig& c, std::string_view v) { c.ablation.connection = parse_scheme(v); },
                 [](const RunConfig& c) { return std::string(to_string(c.ablation.connection)); }});
    f.push_back(double_field("mlm.rate", &RunConfig::mask_rate));
    f.push_back({"mlm.mask_prob",
                 [](RunConfig& c, std::string_view v) { c.mask_policy.mask_prob = parse_number<double>("mlm.mask_prob", v); },
                 [](const RunConfig& c) { return format_double(c.mask_policy.mask_prob); }});
    f.push_back({"mlm.random_prob",
                 [](RunConfig& c, std::string_view v) {
                   c.mask_policy.random_prob = parse_number<double>("mlm.random_prob", v);
                 },
                 [](const RunConfig& c) { return format_double(c.mask_policy.random_prob); }});
    f.push_back(bool_field("data.ancestor_closure", [](RunConfig& c) -> bool& { return c.ancestor_closure; }));
    f.push_back(bool_field("decode.path_consistency", [](RunConfig& c) -> bool& { return c.path_consistency; }));
    f.push_back({"eval.macro_policy",
                 [](RunConfig& c, std::string_view v) {
                   if (v == "include-all") c.macro_policy = MacroPolicy::kIncludeAll;
                   else if (v == "exclude-absent") c.macro_policy = MacroPolicy::kExcludeAbsent;
                   else bad_value("eval.macro_policy", v);
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.macro_policy)); }});
    f.push_back(int_field("structure.layers", &RunConfig::structure_layers));
    f.push_back(encoder_int("encoder.width", &EncoderConfig::width));
    f.push_back(encoder_int("encoder.heads", &EncoderConfig::heads));
    f.push_back(encoder_int("encoder.feed_forward", &EncoderConfig::feed_forward));
    f.push_back(encoder_int("encoder.layers", &EncoderConfig::layers));
    f.push_back(encoder_int("encoder.max_length", &EncoderConfig::max_length));
    f.push_back(bool_field("encoder.positional", [](RunConfig& c) -> bool& { return c.encoder.positional; }));
    f.push_back({"encoder.init_std",
                 [](RunConfig& c, std::string_view v) { c.encoder.init_std = parse_number<double>("encoder.init_std", v); },
                 [](const RunConfig& c) { return format_double(c.encoder.init_std); }});
    f.push_back(int_field("prompt.soft_length", &RunConfig::soft_template_length));
    f.push_back({"prompt.hard_template",
                 [](RunConfig& c, std::string_view v) { c.hard_template = std::string(v); },
                 [](const RunConfig& c) { return c.hard_template; }});
    f.push_back({"prompt.verbalizer_map",
                 [](RunConfig& c, std::string_view v) { c.verbalizer_map = std::string(v); },
                 [](const RunConfig& c) { return c.verbalizer_map; }});
    return f;
  }();
  return table;
}

const Field& field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw Error(ErrorKind::kInvalidConfig, "unknown config key '" + std::string(key) + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

bool is_config_key(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return true;
  }
  return false;
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view value) {
  field(key).set(config, trim(value));
}

std::string get_config_value(const RunConfig& config, std::string_view key) { return field(key).get(config); }

KeyValues to_key_values(const RunConfig& config) {
  KeyValues kv;
  for (const auto& f : fields()) kv.emplace_back(f.key, f.get(config));
  return kv;
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  int line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw Error(ErrorKind::kInvalidConfig, "config line " + std::to_string(line_no) + " is not key=value");
    }
    kv.emplace_back(std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))));
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_key_values(buf.str());
}

void save_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIoError, "cannot write '" + path.string() + "'");
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
}

void apply_key_values(RunConfig& config, const KeyValues& kv) {
  for (const auto& [k, v] : kv) set_config_value(config, k, v);
}

}  // namespace hpt
