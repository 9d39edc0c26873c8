#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hpt/autograd.hpp"
#include "hpt/encoder.hpp"
#include "hpt/hierarchy.hpp"

namespace hpt {

enum class PromptKind { kHpt, kFlatHpt, kHard, kSoft, kFinetune };

std::string_view to_string(PromptKind kind) noexcept;

/// Where everything sits in an assembled input. Positions are 0-based rows;
/// the text occupies [text_begin, text_end).
struct PromptLayout {
  std::size_t length = 0;
  int text_begin = 1;
  int text_end = 1;
  std::vector<int> template_positions;
  std::vector<int> prediction_positions;
  std::vector<int> special_positions;
};

/// Rows reserved around the text by the HPT layout: CLS, SEP, L template/PRED
/// pairs and the closing SEP.
constexpr int hpt_overhead(int layers) { return 2 * layers + 3; }

/// [CLS] x_1..x_N [SEP] t'_1 [PRED] ... t'_L [PRED] [SEP]
/// `injected` is L x d, `pred_embedding` 1 x d and shared by every slot. The
/// text is cut to fit before the template is attached; throws TemplateOverflow
/// if the template alone does not fit.
std::pair<EmbeddedSequence, PromptLayout> assemble_hpt_input(Tape& tape, const MaskedLanguageModel& encoder,
                                                             std::span<const int> text_ids, Var injected,
                                                             Var pred_embedding);

struct BaselineInputs {
  std::span<const int> hard_template_ids;  // e.g. "the text is about"
  std::span<const int> hard_verbalizer_ids;
  Var soft_templates;  // k x d learnable virtual words
  Var flat_template;   // 1 x d, injected
  Var pred_embedding;  // 1 x d
};

/// hard:     [CLS] x [SEP] the text is about [MASK] [SEP]
/// soft:     [CLS] x [SEP] [V1]..[Vk] [MASK] [SEP]
/// finetune: [CLS] x [SEP], predicting from [CLS]
/// flat-hpt: [CLS] x [SEP] t'_1 [PRED] [SEP]
/// Throws MissingVerbalizerMap for a hard prompt without verbalizer words.
std::pair<EmbeddedSequence, PromptLayout> assemble_baseline_input(Tape& tape, const MaskedLanguageModel& encoder,
                                                                  std::span<const int> text_ids, PromptKind kind,
                                                                  const BaselineInputs& inputs);

/// Learnable label words v_i (|Y| x d) and biases b_i (|Y| x 1). Each label
/// belongs to exactly one layer and is scored only there.
struct VerbalizerTable {
  const Parameter* embeddings = nullptr;
  const Parameter* bias = nullptr;
  std::vector<int> layer_of;

  std::size_t size() const noexcept { return layer_of.size(); }
  /// Row of v_i when label `id` lives on layer m, nothing otherwise.
  std::optional<int> verbalizer(LabelId id, int m) const;
};

/// Mean token embedding of each label name, one row per label.
Matrix label_name_embeddings(const LabelHierarchy& hier, const Matrix& embed_table, const Vocabulary& vocab);

/// Registers `<prefix>.embeddings` (name means) and `<prefix>.bias` (zeros).
VerbalizerTable init_verbalizers(const LabelHierarchy& hier, const Matrix& embed_table, const Vocabulary& vocab,
                                 ParameterStore& store, const std::string& prefix = "prompt.verbalizer");
/// Binds to previously registered verbalizer parameters.
VerbalizerTable bind_verbalizers(const LabelHierarchy& hier, const ParameterStore& store,
                                 const std::string& prefix = "prompt.verbalizer");

/// s_i = v_i . h_slot + b_i for each label in `labels`, as a 1 x |labels| row.
Var slot_scores(Tape& tape, const HiddenStates& hidden, int slot, const VerbalizerTable& verbs,
                std::span<const LabelId> labels);

/// Scores of the labels of layer m read from the m-th prediction slot.
/// Throws LayerOutOfRange.
Var layer_scores(Tape& tape, const HiddenStates& hidden, const PromptLayout& layout, const VerbalizerTable& verbs,
                 const LabelHierarchy& hier, int m);

/// Masked-LM scores at the prediction slot restricted to the verbalizer
/// words, one per label.
Var hard_prompt_scores(Tape& tape, const MaskedLanguageModel& encoder, const HiddenStates& hidden,
                       const PromptLayout& layout, std::span<const int> verbalizer_ids);

/// `label<TAB>word` lines.
std::map<std::string, std::string> load_verbalizer_map(const std::filesystem::path& path);
/// Word id per label id. Throws MissingVerbalizerMap when a label has no word.
std::vector<int> resolve_verbalizer_ids(const std::map<std::string, std::string>& map, const LabelHierarchy& hier,
                                        const Vocabulary& vocab);

}  // namespace hpt
