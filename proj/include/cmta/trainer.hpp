#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cmta/checkpoint.hpp"
#include "cmta/manifest.hpp"
#include "cmta/metrics.hpp"

namespace cmta {

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0;
  // The maximized quantity: AUC, ACC, or negated mean loss.
  double val_metric = 0;
  double lr = 0;  // rate used during the epoch
};

// `epoch,train_loss,val_metric,lr` with a header row.
std::string render_epoch_log(const std::vector<EpochLog>& log);
std::string render_epoch_row(const EpochLog& row);

enum class EvalSampling { kCenter, kRandom };

// Scores clips with the T-frame window chosen by `sampling` (random windows
// draw from `rng`, which is then required).
std::vector<ScoredPrediction> score_clips(const ModelParams& params, const ModelConfig& config,
                                          const std::vector<LoadedClip>& clips, EvalSampling sampling = EvalSampling::kCenter,
                                          std::mt19937_64* rng = nullptr);

double validation_metric(ValMetric metric, std::span<const ScoredPrediction> preds);

// One optimizer step's worth of work: mean BCE over the batch, gradients
// summed into `grads` (which must be zeroed by the caller).
double batch_loss_and_grads(const ModelParams& params, const ModelConfig& config,
                            std::span<const EmbeddingClip* const> batch, ModelParams& grads,
                            std::mt19937_64* dropout_rng = nullptr);

struct TrainResult {
  Checkpoint best;   // highest validation metric
  Checkpoint last;   // state after the final epoch
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Requires both classes in the training set. The config's visual/text dims
// must match the data. Deterministic for a given config, seed and data.
TrainResult train(const TrainConfig& config, const std::vector<LoadedClip>& train_set,
                  const std::vector<LoadedClip>& val_set, const EpochCallback& on_epoch = {});

// Sets visual_dim/text_dim from the data; throws ConfigError when clips disagree.
void infer_dims(ModelConfig& config, const std::vector<LoadedClip>& clips);

}  // namespace cmta
