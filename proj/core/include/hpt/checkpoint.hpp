#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "hpt/autograd.hpp"
#include "hpt/config.hpp"
#include "hpt/model.hpp"

namespace hpt {

/// Little-endian binary archive: "HPTPARAM1", count, then per tensor its name,
/// rows, cols and column-major doubles.
void save_parameters(const std::filesystem::path& path, const ParameterStore& params);
ParameterStore load_parameters(const std::filesystem::path& path);

/// Writes a checkpoint directory:
///   params.bin      parameter archive
///   vocab.txt       token per line, id = line number
///   taxonomy.tsv    label tree
///   verbalizer.tsv  hard-prompt map (hard variant only)
///   manifest.txt    resolved config, seed and toolkit version
void save_checkpoint(const std::filesystem::path& dir, const HptModel& model, const KeyValues& extra_manifest = {});

struct Checkpoint {
  RunConfig config;
  std::unique_ptr<HptModel> model;
};

/// `overrides` are applied on top of the manifest config before the model is
/// rebuilt; only keys that leave the parameter shapes unchanged are safe.
Checkpoint load_checkpoint(const std::filesystem::path& dir, const KeyValues& overrides = {});

/// Manifest lines for `config` plus toolkit version and any extras.
KeyValues manifest_entries(const RunConfig& config, const KeyValues& extra = {});

}  // namespace hpt
