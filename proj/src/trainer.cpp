#include "cmta/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cmta/errors.hpp"

namespace cmta {

std::string render_epoch_row(const EpochLog& row) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", row.epoch, row.train_loss, row.val_metric, row.lr);
  return buf;
}

std::string render_epoch_log(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,val_metric,lr\n";
  for (const auto& row : log) out += render_epoch_row(row);
  return out;
}

void infer_dims(ModelConfig& config, const std::vector<LoadedClip>& clips) {
  if (clips.empty()) throw ConfigError("no clips to infer embedding dimensions from");
  const std::size_t dv = clips.front().clip.visual_dim(), de = clips.front().clip.text_dim();
  for (const auto& c : clips) {
    if (c.clip.visual_dim() != dv || c.clip.text_dim() != de) {
      throw ConfigError("inconsistent embedding dims: " + clips.front().clip.clip_id + " has d_v=" +
                        std::to_string(dv) + ", d_e=" + std::to_string(de) + " but " + c.clip.clip_id + " has d_v=" +
                        std::to_string(c.clip.visual_dim()) + ", d_e=" + std::to_string(c.clip.text_dim()));
    }
  }
  config.visual_dim = dv;
  config.text_dim = de;
}

std::vector<ScoredPrediction> score_clips(const ModelParams& params, const ModelConfig& config,
                                          const std::vector<LoadedClip>& clips, EvalSampling sampling,
                                          std::mt19937_64* rng) {
  check_params(config, params);
  if (sampling == EvalSampling::kRandom && !rng) throw ConfigError("random evaluation sampling needs a generator");
  std::vector<ScoredPrediction> out;
  out.reserve(clips.size());
  ad::Tape tape;
  const ModelVars vars = bind(tape, params, false);
  const std::size_t bound = tape.size();
  for (const auto& c : clips) {
    const EmbeddingClip window = sampling == EvalSampling::kCenter
                                     ? center_clip(c.clip, static_cast<long>(config.clip_len))
                                     : sample_clip(c.clip, static_cast<long>(config.clip_len), *rng);
    const Tensor& probs = forward(tape, vars, config, window).probs.value();
    out.push_back({c.clip.clip_id, static_cast<double>(probs[1]), c.clip.label});
    // Drop the clip's activations but keep the bound parameters.
    tape.truncate(bound);
  }
  return out;
}

double validation_metric(ValMetric metric, std::span<const ScoredPrediction> preds) {
  switch (metric) {
    case ValMetric::kAuc: return auc(preds);
    case ValMetric::kAcc: return accuracy(preds);
    case ValMetric::kLoss: {
      if (preds.empty()) throw UndefinedMetric("validation loss of an empty set");
      double total = 0;
      for (const auto& p : preds) total += bce_loss(static_cast<Real>(p.score), p.label);
      return -total / static_cast<double>(preds.size());
    }
  }
  throw ConfigError("unknown validation metric");
}

double batch_loss_and_grads(const ModelParams& params, const ModelConfig& config,
                            std::span<const EmbeddingClip* const> batch, ModelParams& grads,
                            std::mt19937_64* dropout_rng) {
  if (batch.empty()) throw ConfigError("empty batch");
  ad::Tape tape;
  const ModelVars vars = bind(tape, params, true);
  std::vector<ad::Var> losses;
  losses.reserve(batch.size());
  const ForwardOptions options{false, dropout_rng};
  for (const EmbeddingClip* clip : batch) {
    losses.push_back(bce_loss(forward(tape, vars, config, *clip, options).probs, clip->label));
  }
  const ad::Var loss = ad::scale(ad::add_n(losses), Real(1) / static_cast<Real>(batch.size()));
  const double value = loss.value()[0];
  if (!std::isfinite(value)) throw NonFiniteError("training loss is not finite");
  tape.backward(loss);
  accumulate_grads(tape, vars, grads);
  return value;
}

TrainResult train(const TrainConfig& config, const std::vector<LoadedClip>& train_set,
                  const std::vector<LoadedClip>& val_set, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");
  if (val_set.empty()) throw ConfigError("validation set is empty");
  const bool has_real = std::any_of(train_set.begin(), train_set.end(),
                                    [](const LoadedClip& c) { return c.clip.label == Label::kReal; });
  const bool has_fake = std::any_of(train_set.begin(), train_set.end(),
                                    [](const LoadedClip& c) { return c.clip.label == Label::kFake; });
  if (!has_real || !has_fake) throw ConfigError("training data must contain both real and fake clips");
  const ModelConfig& model = config.model;
  for (const auto* set : {&train_set, &val_set}) {
    for (const auto& c : *set) {
      if (c.clip.visual_dim() != model.visual_dim || c.clip.text_dim() != model.text_dim) {
        throw ConfigError("clip " + c.clip.clip_id + " has d_v=" + std::to_string(c.clip.visual_dim()) + ", d_e=" +
                          std::to_string(c.clip.text_dim()) + "; config expects d_v=" +
                          std::to_string(model.visual_dim) + ", d_e=" + std::to_string(model.text_dim));
      }
    }
  }

  std::mt19937_64 rng(config.seed);
  Checkpoint state;
  state.config = config;
  state.params = init_params(model, rng);
  state.optimizer = AdamState::for_params(state.params, config.adam_beta1, config.adam_beta2, config.adam_eps);
  PlateauScheduler scheduler(config.lr, config.lr_factor, config.patience, config.plateau_threshold);
  state.scheduler = scheduler.state();

  const auto clip_len = static_cast<long>(model.clip_len);
  std::vector<EmbeddingClip> windows(train_set.size());
  auto resample = [&] {
    for (std::size_t i = 0; i < train_set.size(); ++i) windows[i] = sample_clip(train_set[i].clip, clip_len, rng);
  };
  if (config.freeze_clips) resample();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  ModelParams grads = zeros_like(state.params);
  std::mt19937_64* dropout_rng = model.dropout > 0 ? &rng : nullptr;

  TrainResult result;
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (!config.freeze_clips) resample();
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = scheduler.lr();
    double loss_sum = 0;
    std::vector<const EmbeddingClip*> batch;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&windows[order[i]]);
      ModelParams::visit(grads, [](const auto&, Tensor& t, ParamKind) { t.fill(Real(0)); });
      const double loss = batch_loss_and_grads(state.params, model, batch, grads, dropout_rng);
      adam_step(state.params, grads, state.optimizer, lr);
      loss_sum += loss * static_cast<double>(batch.size());
    }

    const auto preds = score_clips(state.params, model, val_set);
    const double metric = validation_metric(config.val_metric, preds);
    const EpochLog row{epoch, loss_sum / static_cast<double>(order.size()), metric, lr};
    result.log.push_back(row);
    scheduler.step(metric);

    state.epoch = epoch;
    state.scheduler = scheduler.state();
    if (!have_best || metric > result.best.best_metric) {
      have_best = true;
      result.best = state;
      result.best.best_metric = metric;
    }
    state.best_metric = result.best.best_metric;
    if (on_epoch) on_epoch(row);
  }
  result.last = std::move(state);
  return result;
}

}  // namespace cmta
