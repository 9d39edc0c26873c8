#include "hpt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "hpt/error.hpp"
#include "hpt/losses.hpp"

namespace hpt {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 finaliser over a simple combination.
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b * 0xBF58476D1CE4E5B9ULL + c * 0x94D049BB133111EBULL + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Vocabulary build_vocabulary(const Datasets& data, const LabelHierarchy& hierarchy, const RunConfig& config,
                            const HptModel::VerbalizerMap& verbalizers) {
  std::vector<std::string> texts;
  texts.reserve(data.train.size());
  for (const auto& ex : data.train) texts.push_back(ex.text);
  std::vector<std::string> extra;
  for (const auto& n : hierarchy.nodes()) extra.push_back(n.name);
  for (auto& w : prompt_vocabulary_words(config, verbalizers)) extra.push_back(std::move(w));
  return Vocabulary::build(texts, extra);
}

std::vector<EncodedExample> encode_examples(const HptModel& model, std::span<const Example> examples) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  const auto& hier = model.hierarchy();
  for (const auto& ex : examples) {
    EncodedExample e;
    e.ids = model.encode_text(ex.text);
    for (const auto& layer : positives_per_layer(ex.labels, hier, model.config().ancestor_closure)) {
      e.labels.insert(e.labels.end(), layer.begin(), layer.end());
    }
    std::sort(e.labels.begin(), e.labels.end());
    out.push_back(std::move(e));
  }
  return out;
}

Var example_loss(const HptModel& model, Tape& tape, const EncodedExample& example, std::uint64_t mask_seed) {
  const RunConfig& cfg = model.config();
  const bool mlm = model.uses_mlm();
  MaskingResult masking;
  std::span<const int> input = example.ids;
  if (mlm) {
    masking = mlm_masking(example.ids, cfg.mask_rate, mask_seed, Vocabulary::kMask, Vocabulary::kFirstWord,
                          model.encoder().vocabulary().size(), cfg.mask_policy);
    input = masking.corrupted;
  }
  const auto out = model.forward(tape, input);
  const auto positives = group_positives(model.groups(), example.labels);
  std::vector<Var> terms;
  for (std::size_t g = 0; g < out.scores.size(); ++g) {
    terms.push_back(model.uses_zmlce() ? ops::zmlce(out.scores[g], positives[g]) : ops::bce(out.scores[g], positives[g]));
  }
  if (mlm && !masking.plan.empty()) {
    const auto positions = masking.plan.sequence_positions(out.layout.text_begin);
    const Var logits = model.encoder().mlm_logits(tape, out.hidden, positions);
    terms.push_back(ops::softmax_cross_entropy(logits, masking.plan.original_ids));
  }
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = ops::add(total, terms[i]);
  return total;
}

AdamOptimizer::AdamOptimizer(const ParameterStore& params, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
    v_.push_back(Matrix::Zero(params[i].value.rows(), params[i].value.cols()));
  }
}

void AdamOptimizer::step(ParameterStore& params, const Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    params[i].value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

Trainer::Trainer(HptModel& model, const RunConfig& config)
    : model_(model),
      config_(config),
      adam_(model.params(), config.learning_rate, config.beta1, config.beta2, config.adam_eps) {}

Gradients Trainer::gradient(std::span<const EncodedExample> batch, std::uint64_t mask_seed, double* loss) const {
  Gradients grads(model_.params());
  if (batch.empty()) return grads;
  const double inv = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape tape;
    const Var l = example_loss(model_, tape, batch[i], mix_seed(mask_seed, i));
    if (!std::isfinite(l.scalar())) throw Error(ErrorKind::kDivergedLoss, "non-finite training loss");
    total += l.scalar();
    tape.backward(l);
    tape.accumulate(grads, inv);
  }
  if (loss != nullptr) *loss = total * inv;
  return grads;
}

double Trainer::step(std::span<const EncodedExample> batch, std::uint64_t mask_seed) {
  double loss = 0.0;
  Gradients grads = gradient(batch, mask_seed, &loss);
  if (config_.clip_norm > 0.0) {
    const double norm = grads.norm();
    if (!std::isfinite(norm)) throw Error(ErrorKind::kDivergedLoss, "non-finite gradient");
    if (norm > config_.clip_norm) grads.scale(config_.clip_norm / norm);
  }
  adam_.step(model_.params(), grads);
  return loss;
}

Predictions predict(const HptModel& model, std::span<const Example> examples) {
  Predictions p;
  const auto encoded = encode_examples(model, examples);
  for (const auto& e : encoded) {
    const auto scores = model.score(e.ids);
    p.predicted.push_back(decode(scores, model.groups(), model.hierarchy(), model.config().path_consistency));
    p.gold.push_back(e.labels);
  }
  return p;
}

Evaluation evaluate_model(const HptModel& model, std::span<const Example> examples) {
  const auto p = predict(model, examples);
  return evaluate(p.predicted, p.gold, model.hierarchy(), model.config().macro_policy);
}

void finalize_metrics(const HptModel& model, const Datasets& data, RunMetrics& metrics) {
  metrics.test = evaluate_model(model, data.test);
  std::vector<std::vector<LabelId>> gold;
  for (const auto& e : encode_examples(model, data.train)) gold.push_back(e.labels);
  metrics.train_counts = label_frequencies(gold, model.hierarchy().size());
  metrics.depth_clusters = cluster_report(metrics.test.per_label, model.hierarchy(), metrics.train_counts,
                                          ClusterMode::kDepth, model.config().macro_policy);
  metrics.frequency_clusters = cluster_report(metrics.test.per_label, model.hierarchy(), metrics.train_counts,
                                              ClusterMode::kFrequency, model.config().macro_policy);
}

TrainResult train(const RunConfig& config, const LabelHierarchy& hierarchy, const Datasets& data, std::ostream* log,
                  const HptModel::VerbalizerMap& verbalizers) {
  config.validate();
  if (data.train.empty()) throw Error(ErrorKind::kEmptyDataset, "training set is empty");
  if (data.dev.empty()) throw Error(ErrorKind::kEmptyDataset, "development set is empty");
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  result.model = HptModel::create(config, hierarchy, build_vocabulary(data, hierarchy, config, verbalizers), verbalizers);
  HptModel& model = *result.model;
  RunMetrics& metrics = result.metrics;
  metrics.train_size = data.train.size();

  const auto train_set = encode_examples(model, data.train);
  Trainer trainer(model, config);
  std::mt19937_64 order_rng(mix_seed(config.seed, 0x5eed));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  metrics.dev = evaluate_model(model, data.dev);
  double best_macro = metrics.dev.overall.macro;
  ParameterStore best = model.params();
  int stale = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config.batch_size)) {
      std::vector<EncodedExample> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + static_cast<std::size_t>(config.batch_size)); ++i) {
        batch.push_back(train_set[order[i]]);
      }
      const double loss = trainer.step(batch, mix_seed(config.seed, static_cast<std::uint64_t>(epoch), b));
      metrics.step_losses.push_back(loss);
      epoch_loss += loss;
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(1, batches));
    const Evaluation dev = evaluate_model(model, data.dev);
    rec.dev = dev.overall;
    metrics.epochs.push_back(rec);
    if (log != nullptr) {
      *log << "epoch " << std::setw(3) << epoch << "  loss " << std::fixed << std::setprecision(4) << rec.train_loss
           << "  dev micro " << rec.dev.micro << "  macro " << rec.dev.macro << std::defaultfloat << '\n';
    }
    if (dev.overall.macro > best_macro) {
      best_macro = dev.overall.macro;
      best = model.params();
      metrics.best_epoch = epoch;
      metrics.dev = dev;
      stale = 0;
    } else {
      ++stale;
    }
    if (stale >= config.patience) break;
  }

  for (std::size_t i = 0; i < best.size(); ++i) model.params()[i].value = best[i].value;
  finalize_metrics(model, data, metrics);
  metrics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace hpt
