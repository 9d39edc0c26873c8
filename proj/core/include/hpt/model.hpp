#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpt/config.hpp"
#include "hpt/encoder.hpp"
#include "hpt/hierarchy.hpp"
#include "hpt/prompt.hpp"
#include "hpt/structure.hpp"

namespace hpt {

/// Encoder, prompt parameters and structure encoder for one model variant,
/// all registered in a single ParameterStore. Not copyable: components hold
/// pointers into the store. Snapshot weights by copying params().
class HptModel {
 public:
  using VerbalizerMap = std::map<std::string, std::string>;

  /// Fresh initialisation from `config.seed`.
  static std::unique_ptr<HptModel> create(const RunConfig& config, LabelHierarchy hierarchy, Vocabulary vocab,
                                          VerbalizerMap verbalizers = {});
  /// Rebinds to trained weights (e.g. from a checkpoint).
  static std::unique_ptr<HptModel> restore(const RunConfig& config, LabelHierarchy hierarchy, Vocabulary vocab,
                                           ParameterStore params, VerbalizerMap verbalizers = {});

  HptModel(const HptModel&) = delete;
  HptModel& operator=(const HptModel&) = delete;

  struct Output {
    std::vector<Var> scores;  // one 1 x |group| row per label group
    PromptLayout layout;
    HiddenStates hidden;
  };

  /// Token ids of `text`, cut to the room the prompt leaves.
  std::vector<int> encode_text(std::string_view text) const;
  std::size_t text_capacity() const;

  Output forward(Tape& tape, std::span<const int> text_ids) const;
  /// Scores per group without recording gradients.
  std::vector<std::vector<double>> score(std::span<const int> text_ids) const;

  /// t'_i rows: templates plus the propagated virtual-node features, or the
  /// bare templates when injection is disabled.
  Var injected_templates(Tape& tape) const;

  /// Label ids scored by each prediction slot: the layers for HPT, a single
  /// group with every label otherwise.
  const std::vector<std::vector<LabelId>>& groups() const noexcept { return groups_; }
  PromptKind kind() const noexcept { return kind_; }
  bool uses_zmlce() const noexcept;
  bool uses_mlm() const noexcept;

  const RunConfig& config() const noexcept { return config_; }
  const LabelHierarchy& hierarchy() const noexcept { return hierarchy_; }
  const TransformerEncoder& encoder() const noexcept { return *encoder_; }
  const AugmentedGraph& graph() const noexcept { return graph_; }
  const VerbalizerTable& verbalizers() const noexcept { return verbalizers_; }
  const VerbalizerMap& verbalizer_map() const noexcept { return verbalizer_map_; }
  ParameterStore& params() noexcept { return params_; }
  const ParameterStore& params() const noexcept { return params_; }

 private:
  HptModel(const RunConfig& config, LabelHierarchy hierarchy, VerbalizerMap verbalizers);
  void finish_setup(Vocabulary vocab, bool fresh);

  RunConfig config_;
  LabelHierarchy hierarchy_;
  VerbalizerMap verbalizer_map_;
  ParameterStore params_;
  PromptKind kind_ = PromptKind::kHpt;
  std::unique_ptr<TransformerEncoder> encoder_;
  AugmentedGraph graph_;
  StructureEncoderParams structure_;
  VerbalizerTable verbalizers_;
  const Parameter* templates_ = nullptr;
  const Parameter* pred_ = nullptr;
  const Parameter* soft_templates_ = nullptr;
  std::vector<int> hard_template_ids_;
  std::vector<int> hard_verbalizer_ids_;
  std::vector<std::vector<LabelId>> groups_;
};

/// Extra words a vocabulary must contain for `config` (hard template and
/// verbalizer words) besides the corpus and label names.
std::vector<std::string> prompt_vocabulary_words(const RunConfig& config, const HptModel::VerbalizerMap& verbalizers);

/// Split a positive label set into per-group indices.
std::vector<std::vector<int>> group_positives(const std::vector<std::vector<LabelId>>& groups,
                                              std::span<const LabelId> positives);

}  // namespace hpt
