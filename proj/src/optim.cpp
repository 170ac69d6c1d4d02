#include "cmta/optim.hpp"

#include <cmath>

#include "cmta/errors.hpp"

namespace cmta {

void xavier_uniform(Tensor& weight, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(weight.cols());
  const double fan_out = static_cast<double>(weight.rows());
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : weight.values()) v = static_cast<Real>(dist(rng));
}

ModelParams init_params(const ModelConfig& config, std::mt19937_64& rng) {
  ModelParams p = make_params(config);
  ModelParams::visit(p, [&](const auto&, Tensor& t, ParamKind kind) {
    switch (kind) {
      case ParamKind::kWeight: xavier_uniform(t, rng); break;
      case ParamKind::kBias: t.fill(Real(0)); break;
      case ParamKind::kGain: t.fill(Real(1)); break;
    }
  });
  return p;
}

AdamState AdamState::for_params(std::span<const Tensor* const> params, double beta1, double beta2, double eps) {
  AdamState s;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  for (const Tensor* p : params) {
    s.m.push_back(Tensor::zeros_like(*p));
    s.v.push_back(Tensor::zeros_like(*p));
  }
  return s;
}

AdamState AdamState::for_params(const ModelParams& params, double beta1, double beta2, double eps) {
  const auto ptrs = slots<const Tensor>(params);
  return for_params(std::span<const Tensor* const>(ptrs), beta1, beta2, eps);
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, AdamState& state, double lr,
               std::span<const std::string> names) {
  if (params.size() != grads.size() || params.size() != state.m.size() || params.size() != state.v.size()) {
    throw ConfigError("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() || params[i]->shape() != state.m[i].shape()) {
      throw ConfigError("adam_step: shape mismatch for parameter " + (i < names.size() ? names[i] : std::to_string(i)));
    }
    if (!grads[i]->all_finite()) {
      throw NonFiniteError("non-finite gradient for parameter " + (i < names.size() ? names[i] : std::to_string(i)));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Real* p = params[i]->data();
    const Real* g = grads[i]->data();
    Real* m = state.m[i].data();
    Real* v = state.v[i].data();
    for (std::size_t k = 0; k < params[i]->size(); ++k) {
      const double gk = g[k];
      const double mk = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
      const double vk = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
      m[k] = static_cast<Real>(mk);
      v[k] = static_cast<Real>(vk);
      const double m_hat = mk / correction1;
      const double v_hat = vk / correction2;
      p[k] = static_cast<Real>(p[k] - lr * m_hat / (std::sqrt(v_hat) + state.eps));
    }
  }
}

std::vector<std::string> parameter_names(const ModelParams& params) {
  std::vector<std::string> names;
  ModelParams::visit(params, [&](const std::string& name, const Tensor&, ParamKind) { names.push_back(name); });
  return names;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
  const auto p = slots<Tensor>(params);
  const auto g = slots<const Tensor>(grads);
  const auto names = parameter_names(params);
  adam_step(std::span<Tensor* const>(p), std::span<const Tensor* const>(g), state, lr, names);
}

PlateauScheduler::PlateauScheduler(double lr, double factor, std::size_t patience, double threshold)
    : factor_(factor), patience_(patience), threshold_(threshold) {
  if (!(lr > 0)) throw ConfigError("scheduler learning rate must be positive");
  if (!(factor > 0 && factor < 1)) throw ConfigError("scheduler factor must lie in (0, 1)");
  if (patience < 1) throw ConfigError("scheduler patience must be at least 1");
  state_.lr = lr;
}

PlateauScheduler::PlateauScheduler(const State& state, double factor, std::size_t patience, double threshold)
    : PlateauScheduler(state.lr, factor, patience, threshold) {
  state_ = state;
}

double PlateauScheduler::step(double metric) {
  const bool improved = !state_.has_best || metric > state_.best + std::abs(state_.best) * threshold_;
  if (improved) {
    state_.best = metric;
    state_.has_best = true;
    state_.bad_epochs = 0;
  } else if (++state_.bad_epochs >= patience_) {
    state_.lr *= factor_;
    ++state_.reductions;
    state_.bad_epochs = 0;
  }
  return state_.lr;
}

}  // namespace cmta
