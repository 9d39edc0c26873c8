#include "hpt/prompt.hpp"

#include <algorithm>
#include <fstream>

#include "hpt/error.hpp"

namespace hpt {

std::string_view to_string(PromptKind kind) noexcept {
  switch (kind) {
    case PromptKind::kHpt: return "hpt";
    case PromptKind::kFlatHpt: return "flat-hpt";
    case PromptKind::kHard: return "hard";
    case PromptKind::kSoft: return "soft";
    case PromptKind::kFinetune: return "finetune";
  }
  return "unknown";
}

namespace {

// Builds the row list piecewise: runs of token ids become table lookups, other
// pieces are spliced in as given.
class SequenceBuilder {
 public:
  SequenceBuilder(Tape& tape, const MaskedLanguageModel& encoder) : tape_(tape), table_(encoder.token_table(tape)) {}

  int tokens(std::span<const int> ids) {
    const int at = static_cast<int>(length_);
    pending_.insert(pending_.end(), ids.begin(), ids.end());
    length_ += ids.size();
    return at;
  }
  int token(int id) { return tokens(std::span<const int>(&id, 1)); }
  int rows(Var v) {
    flush();
    const int at = static_cast<int>(length_);
    parts_.push_back(v);
    length_ += static_cast<std::size_t>(v.rows());
    return at;
  }
  std::size_t length() const noexcept { return length_; }

  EmbeddedSequence finish() {
    flush();
    EmbeddedSequence seq;
    seq.rows = parts_.size() == 1 ? parts_.front() : ops::concat_rows(parts_);
    seq.pad.assign(length_, 0);
    return seq;
  }

 private:
  void flush() {
    if (pending_.empty()) return;
    parts_.push_back(ops::gather_rows(table_, pending_));
    pending_.clear();
  }

  Tape& tape_;
  Var table_;
  std::vector<int> pending_;
  std::vector<Var> parts_;
  std::size_t length_ = 0;
};

void check_width(Var v, int width, const char* what) {
  if (!v.valid() || v.cols() != width) {
    throw Error(ErrorKind::kDimensionMismatch, std::string(what) + " must have width " + std::to_string(width));
  }
}

std::span<const int> fit_text(std::span<const int> text_ids, int max_length, int overhead) {
  if (overhead > max_length) {
    throw Error(ErrorKind::kTemplateOverflow, "template needs " + std::to_string(overhead) + " rows, max length is " +
                                                  std::to_string(max_length));
  }
  const auto room = static_cast<std::size_t>(max_length - overhead);
  return text_ids.first(std::min(room, text_ids.size()));
}

// CLS + text + SEP, shared by every layout.
void open_text(SequenceBuilder& b, PromptLayout& layout, std::span<const int> text) {
  layout.special_positions.push_back(b.token(Vocabulary::kCls));
  layout.text_begin = static_cast<int>(b.length());
  b.tokens(text);
  layout.text_end = static_cast<int>(b.length());
  layout.special_positions.push_back(b.token(Vocabulary::kSep));
}

}  // namespace

std::pair<EmbeddedSequence, PromptLayout> assemble_hpt_input(Tape& tape, const MaskedLanguageModel& encoder,
                                                             std::span<const int> text_ids, Var injected,
                                                             Var pred_embedding) {
  check_width(injected, encoder.width(), "injected templates");
  check_width(pred_embedding, encoder.width(), "[PRED] embedding");
  const int layers = static_cast<int>(injected.rows());
  const auto text = fit_text(text_ids, encoder.max_length(), hpt_overhead(layers));

  SequenceBuilder b(tape, encoder);
  PromptLayout layout;
  open_text(b, layout, text);
  for (int i = 0; i < layers; ++i) {
    layout.template_positions.push_back(b.rows(ops::slice_rows(injected, i, 1)));
    layout.prediction_positions.push_back(b.rows(pred_embedding));
  }
  layout.special_positions.push_back(b.token(Vocabulary::kSep));
  layout.length = b.length();
  return {b.finish(), std::move(layout)};
}

std::pair<EmbeddedSequence, PromptLayout> assemble_baseline_input(Tape& tape, const MaskedLanguageModel& encoder,
                                                                  std::span<const int> text_ids, PromptKind kind,
                                                                  const BaselineInputs& inputs) {
  if (kind == PromptKind::kHpt) {
    throw Error(ErrorKind::kInvalidConfig, "use assemble_hpt_input for the layered template");
  }
  if (kind == PromptKind::kFlatHpt) {
    return assemble_hpt_input(tape, encoder, text_ids, inputs.flat_template, inputs.pred_embedding);
  }

  int overhead = 2;
  if (kind == PromptKind::kHard) {
    if (inputs.hard_verbalizer_ids.empty()) {
      throw Error(ErrorKind::kMissingVerbalizerMap, "hard prompt needs a label-to-word map");
    }
    overhead += static_cast<int>(inputs.hard_template_ids.size()) + 2;
  } else if (kind == PromptKind::kSoft) {
    check_width(inputs.soft_templates, encoder.width(), "soft template");
    overhead += static_cast<int>(inputs.soft_templates.rows()) + 2;
  }
  const auto text = fit_text(text_ids, encoder.max_length(), overhead);

  SequenceBuilder b(tape, encoder);
  PromptLayout layout;
  open_text(b, layout, text);
  switch (kind) {
    case PromptKind::kHard:
      for (int id : inputs.hard_template_ids) layout.template_positions.push_back(b.token(id));
      layout.prediction_positions.push_back(b.token(Vocabulary::kMask));
      layout.special_positions.push_back(b.token(Vocabulary::kSep));
      break;
    case PromptKind::kSoft: {
      const int first = b.rows(inputs.soft_templates);
      for (int i = 0; i < inputs.soft_templates.rows(); ++i) layout.template_positions.push_back(first + i);
      layout.prediction_positions.push_back(b.token(Vocabulary::kMask));
      layout.special_positions.push_back(b.token(Vocabulary::kSep));
      break;
    }
    case PromptKind::kFinetune:
      layout.prediction_positions.push_back(0);
      break;
    default:
      break;
  }
  layout.length = b.length();
  return {b.finish(), std::move(layout)};
}

std::optional<int> VerbalizerTable::verbalizer(LabelId id, int m) const {
  if (id < 0 || static_cast<std::size_t>(id) >= layer_of.size() || layer_of[static_cast<std::size_t>(id)] != m) {
    return std::nullopt;
  }
  return id;
}

Matrix label_name_embeddings(const LabelHierarchy& hier, const Matrix& embed_table, const Vocabulary& vocab) {
  Matrix out(static_cast<Eigen::Index>(hier.size()), embed_table.cols());
  for (const auto& node : hier.nodes()) {
    auto ids = tokenize(node.name, vocab);
    if (ids.empty()) ids.push_back(Vocabulary::kUnk);
    RowVector mean = RowVector::Zero(embed_table.cols());
    for (int id : ids) mean += embed_table.row(id);
    out.row(node.id) = mean / static_cast<double>(ids.size());
  }
  return out;
}

VerbalizerTable init_verbalizers(const LabelHierarchy& hier, const Matrix& embed_table, const Vocabulary& vocab,
                                 ParameterStore& store, const std::string& prefix) {
  store.add(prefix + ".embeddings", label_name_embeddings(hier, embed_table, vocab));
  store.add(prefix + ".bias", Matrix::Zero(static_cast<Eigen::Index>(hier.size()), 1));
  return bind_verbalizers(hier, store, prefix);
}

VerbalizerTable bind_verbalizers(const LabelHierarchy& hier, const ParameterStore& store, const std::string& prefix) {
  VerbalizerTable t;
  t.embeddings = &store.at(prefix + ".embeddings");
  t.bias = &store.at(prefix + ".bias");
  if (static_cast<std::size_t>(t.embeddings->value.rows()) != hier.size() ||
      static_cast<std::size_t>(t.bias->value.rows()) != hier.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "verbalizer rows do not match the label count");
  }
  t.layer_of.reserve(hier.size());
  for (const auto& n : hier.nodes()) t.layer_of.push_back(n.depth);
  return t;
}

Var slot_scores(Tape& tape, const HiddenStates& hidden, int slot, const VerbalizerTable& verbs,
                std::span<const LabelId> labels) {
  if (slot < 0 || slot >= hidden.length()) {
    throw Error(ErrorKind::kPositionOutOfRange, "prediction slot " + std::to_string(slot));
  }
  const Var h = ops::slice_rows(hidden.states, slot, 1);
  const Var v = ops::gather_rows(tape.param(*verbs.embeddings), labels);
  const Var b = ops::transpose(ops::gather_rows(tape.param(*verbs.bias), labels));
  return ops::add(ops::matmul_nt(h, v), b);
}

Var layer_scores(Tape& tape, const HiddenStates& hidden, const PromptLayout& layout, const VerbalizerTable& verbs,
                 const LabelHierarchy& hier, int m) {
  if (m < 1 || m > hier.depth() || m > static_cast<int>(layout.prediction_positions.size())) {
    throw Error(ErrorKind::kLayerOutOfRange, "layer " + std::to_string(m));
  }
  return slot_scores(tape, hidden, layout.prediction_positions[static_cast<std::size_t>(m - 1)], verbs,
                     hier.layer(m));
}

Var hard_prompt_scores(Tape& tape, const MaskedLanguageModel& encoder, const HiddenStates& hidden,
                       const PromptLayout& layout, std::span<const int> verbalizer_ids) {
  if (verbalizer_ids.empty()) throw Error(ErrorKind::kMissingVerbalizerMap, "no verbalizer words");
  const int slot = layout.prediction_positions.at(0);
  const Var logits = encoder.mlm_logits(tape, hidden, std::span<const int>(&slot, 1));
  return ops::transpose(ops::gather_rows(ops::transpose(logits), verbalizer_ids));
}

std::map<std::string, std::string> load_verbalizer_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIoError, "cannot open verbalizer map '" + path.string() + "'");
  std::map<std::string, std::string> map;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw Error(ErrorKind::kMalformedRecord, "verbalizer line " + std::to_string(line_no) + " is not label<TAB>word");
    }
    map[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return map;
}

std::vector<int> resolve_verbalizer_ids(const std::map<std::string, std::string>& map, const LabelHierarchy& hier,
                                        const Vocabulary& vocab) {
  std::vector<int> ids;
  ids.reserve(hier.size());
  for (const auto& n : hier.nodes()) {
    const auto it = map.find(n.name);
    if (it == map.end()) throw Error(ErrorKind::kMissingVerbalizerMap, "no verbalizer word for '" + n.name + "'");
    const auto words = tokenize(it->second, vocab);
    ids.push_back(words.empty() ? Vocabulary::kUnk : words.front());
  }
  return ids;
}

}  // namespace hpt
