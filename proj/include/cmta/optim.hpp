#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cmta/model.hpp"

namespace cmta {

// Xavier-uniform weights on ±√(6/(fan_in+fan_out)) with fan_in = columns and
// fan_out = rows, zero biases, unit LayerNorm gains.
void xavier_uniform(Tensor& weight, std::mt19937_64& rng);
ModelParams init_params(const ModelConfig& config, std::mt19937_64& rng);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor> m;  // first moments, one per parameter
  std::vector<Tensor> v;  // second moments

  static AdamState for_params(std::span<const Tensor* const> params, double beta1 = 0.9, double beta2 = 0.999,
                              double eps = 1e-8);
  static AdamState for_params(const ModelParams& params, double beta1 = 0.9, double beta2 = 0.999,
                              double eps = 1e-8);
};

// Bias-corrected Adam. Gradients are checked for finiteness first; a
// non-finite entry throws NonFiniteError naming the parameter and leaves
// both parameters and state untouched.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state, double lr,
               std::span<const std::string> names = {});
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

std::vector<std::string> parameter_names(const ModelParams& params);

// Reduce-on-plateau in maximize mode. An epoch improves when the metric
// exceeds best + |best|·threshold; after `patience` consecutive epochs
// without improvement the rate is multiplied by `factor` and the counter
// resets.
class PlateauScheduler {
 public:
  struct State {
    double lr = 1e-4;
    double best = 0;
    bool has_best = false;
    std::uint32_t bad_epochs = 0;
    std::uint32_t reductions = 0;

    friend bool operator==(const State&, const State&) = default;
  };

  PlateauScheduler(double lr, double factor = 0.5, std::size_t patience = 5, double threshold = 1e-4);
  PlateauScheduler(const State& state, double factor, std::size_t patience, double threshold);

  // Records one epoch's validation metric; returns the rate for the next epoch.
  double step(double metric);
  double lr() const { return state_.lr; }
  const State& state() const { return state_; }

 private:
  State state_;
  double factor_;
  std::size_t patience_;
  double threshold_;
};

}  // namespace cmta
