#include "hpt/model.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "hpt/error.hpp"

namespace hpt {

HptModel::HptModel(const RunConfig& config, LabelHierarchy hierarchy, VerbalizerMap verbalizers)
    : config_(config), hierarchy_(std::move(hierarchy)), verbalizer_map_(std::move(verbalizers)) {
  config_.validate();
  if (hierarchy_.size() == 0) throw Error(ErrorKind::kEmptyDataset, "hierarchy has no labels");
  switch (config_.variant) {
    case ModelVariant::kHpt: kind_ = config_.ablation.flat_template ? PromptKind::kFlatHpt : PromptKind::kHpt; break;
    case ModelVariant::kHard: kind_ = PromptKind::kHard; break;
    case ModelVariant::kSoft: kind_ = PromptKind::kSoft; break;
    case ModelVariant::kFinetune: kind_ = PromptKind::kFinetune; break;
  }
  if (kind_ == PromptKind::kHpt) {
    groups_ = hierarchy_.layers();
    graph_ = build_augmented_graph(hierarchy_, config_.ablation.connection, config_.seed);
  } else {
    std::vector<LabelId> all(hierarchy_.size());
    std::iota(all.begin(), all.end(), 0);
    groups_.push_back(std::move(all));
    if (kind_ == PromptKind::kFlatHpt) graph_ = build_flat_graph(hierarchy_);
  }
}

std::unique_ptr<HptModel> HptModel::create(const RunConfig& config, LabelHierarchy hierarchy, Vocabulary vocab,
                                           VerbalizerMap verbalizers) {
  std::unique_ptr<HptModel> m(new HptModel(config, std::move(hierarchy), std::move(verbalizers)));
  m->finish_setup(std::move(vocab), true);
  return m;
}

std::unique_ptr<HptModel> HptModel::restore(const RunConfig& config, LabelHierarchy hierarchy, Vocabulary vocab,
                                            ParameterStore params, VerbalizerMap verbalizers) {
  std::unique_ptr<HptModel> m(new HptModel(config, std::move(hierarchy), std::move(verbalizers)));
  m->params_ = std::move(params);
  m->finish_setup(std::move(vocab), false);
  return m;
}

void HptModel::finish_setup(Vocabulary vocab, bool fresh) {
  const int d = config_.encoder.width;
  const bool templated = kind_ == PromptKind::kHpt || kind_ == PromptKind::kFlatHpt;
  if (fresh) {
    std::mt19937_64 rng(config_.seed);
    encoder_ = std::make_unique<TransformerEncoder>(config_.encoder, std::move(vocab), params_, rng);
    const Matrix& table = encoder_->token_embeddings().value;
    if (templated) {
      const int slots = kind_ == PromptKind::kHpt ? hierarchy_.depth() : 1;
      params_.add("prompt.templates", random_normal(slots, d, config_.encoder.init_std, rng));
      params_.add("prompt.pred", table.row(Vocabulary::kMask));
    }
    if (kind_ == PromptKind::kFinetune) {
      params_.add("prompt.verbalizer.embeddings",
                  random_normal(static_cast<Eigen::Index>(hierarchy_.size()), d, config_.encoder.init_std, rng));
      params_.add("prompt.verbalizer.bias", Matrix::Zero(static_cast<Eigen::Index>(hierarchy_.size()), 1));
    } else if (kind_ != PromptKind::kHard) {
      init_verbalizers(hierarchy_, table, encoder_->vocabulary(), params_);
    }
    if (templated) {
      const double w_std = 1.0 / std::sqrt(static_cast<double>(d));
      for (int k = 0; k < config_.structure_layers; ++k) {
        params_.add("structure.w" + std::to_string(k), random_normal(d, d, w_std, rng));
      }
    }
    if (kind_ == PromptKind::kSoft) {
      params_.add("prompt.soft_templates", random_normal(config_.soft_template_length, d, config_.encoder.init_std, rng));
    }
  } else {
    encoder_ = std::make_unique<TransformerEncoder>(config_.encoder, std::move(vocab), params_);
  }

  if (templated) {
    templates_ = &params_.at("prompt.templates");
    pred_ = &params_.at("prompt.pred");
    for (int k = 0; k < config_.structure_layers; ++k) structure_.weights.push_back(&params_.at("structure.w" + std::to_string(k)));
  }
  if (kind_ != PromptKind::kHard) verbalizers_ = bind_verbalizers(hierarchy_, params_);
  if (kind_ == PromptKind::kSoft) soft_templates_ = &params_.at("prompt.soft_templates");
  if (kind_ == PromptKind::kHard) {
    if (verbalizer_map_.empty()) {
      throw Error(ErrorKind::kMissingVerbalizerMap, "hard prompt needs prompt.verbalizer_map");
    }
    hard_template_ids_ = tokenize(config_.hard_template, encoder_->vocabulary());
    hard_verbalizer_ids_ = resolve_verbalizer_ids(verbalizer_map_, hierarchy_, encoder_->vocabulary());
  }
}

bool HptModel::uses_zmlce() const noexcept {
  return (kind_ == PromptKind::kHpt || kind_ == PromptKind::kFlatHpt) && !config_.ablation.bce_loss;
}

bool HptModel::uses_mlm() const noexcept {
  return (kind_ == PromptKind::kHpt || kind_ == PromptKind::kFlatHpt) && !config_.ablation.no_mlm &&
         config_.mask_rate > 0.0;
}

std::size_t HptModel::text_capacity() const {
  int overhead = 2;
  switch (kind_) {
    case PromptKind::kHpt: overhead = hpt_overhead(hierarchy_.depth()); break;
    case PromptKind::kFlatHpt: overhead = hpt_overhead(1); break;
    case PromptKind::kHard: overhead = 4 + static_cast<int>(hard_template_ids_.size()); break;
    case PromptKind::kSoft: overhead = 4 + config_.soft_template_length; break;
    case PromptKind::kFinetune: break;
  }
  if (overhead > config_.encoder.max_length) {
    throw Error(ErrorKind::kTemplateOverflow, "prompt needs " + std::to_string(overhead) + " rows, max length is " +
                                                  std::to_string(config_.encoder.max_length));
  }
  return static_cast<std::size_t>(config_.encoder.max_length - overhead);
}

std::vector<int> HptModel::encode_text(std::string_view text) const {
  return encoder_->tokenize(text, text_capacity());
}

Var HptModel::injected_templates(Tape& tape) const {
  const Var templates = tape.param(*templates_);
  if (config_.ablation.no_injection) return templates;
  const Var feats = node_features(tape.param(*verbalizers_.embeddings), templates);
  return inject_templates(templates, propagate(graph_, feats, structure_), graph_);
}

HptModel::Output HptModel::forward(Tape& tape, std::span<const int> text_ids) const {
  Output out;
  EmbeddedSequence seq;
  switch (kind_) {
    case PromptKind::kHpt:
      std::tie(seq, out.layout) = assemble_hpt_input(tape, *encoder_, text_ids, injected_templates(tape), tape.param(*pred_));
      break;
    case PromptKind::kFlatHpt: {
      BaselineInputs in;
      in.flat_template = injected_templates(tape);
      in.pred_embedding = tape.param(*pred_);
      std::tie(seq, out.layout) = assemble_baseline_input(tape, *encoder_, text_ids, kind_, in);
      break;
    }
    case PromptKind::kHard: {
      BaselineInputs in;
      in.hard_template_ids = hard_template_ids_;
      in.hard_verbalizer_ids = hard_verbalizer_ids_;
      std::tie(seq, out.layout) = assemble_baseline_input(tape, *encoder_, text_ids, kind_, in);
      break;
    }
    case PromptKind::kSoft: {
      BaselineInputs in;
      in.soft_templates = tape.param(*soft_templates_);
      std::tie(seq, out.layout) = assemble_baseline_input(tape, *encoder_, text_ids, kind_, in);
      break;
    }
    case PromptKind::kFinetune:
      std::tie(seq, out.layout) = assemble_baseline_input(tape, *encoder_, text_ids, kind_, {});
      break;
  }
  out.hidden = encoder_->encode(tape, seq);
  if (kind_ == PromptKind::kHard) {
    out.scores.push_back(hard_prompt_scores(tape, *encoder_, out.hidden, out.layout, hard_verbalizer_ids_));
    return out;
  }
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    out.scores.push_back(slot_scores(tape, out.hidden, out.layout.prediction_positions.at(g), verbalizers_, groups_[g]));
  }
  return out;
}

std::vector<std::vector<double>> HptModel::score(std::span<const int> text_ids) const {
  Tape tape;
  const Output out = forward(tape, text_ids);
  std::vector<std::vector<double>> scores;
  for (const Var& s : out.scores) scores.emplace_back(s.value().data(), s.value().data() + s.value().size());
  return scores;
}

std::vector<std::string> prompt_vocabulary_words(const RunConfig& config, const HptModel::VerbalizerMap& verbalizers) {
  std::vector<std::string> words;
  if (config.variant == ModelVariant::kHard) {
    words.push_back(config.hard_template);
    for (const auto& [label, word] : verbalizers) words.push_back(word);
  }
  return words;
}

std::vector<std::vector<int>> group_positives(const std::vector<std::vector<LabelId>>& groups,
                                              std::span<const LabelId> positives) {
  std::vector<std::vector<int>> out(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t i = 0; i < groups[g].size(); ++i) {
      for (LabelId p : positives) {
        if (groups[g][i] == p) {
          out[g].push_back(static_cast<int>(i));
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace hpt
