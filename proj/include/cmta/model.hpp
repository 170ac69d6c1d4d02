#pragma once

#include <random>
#include <string>
#include <utility>

#include "cmta/clip.hpp"
#include "cmta/encoder.hpp"
#include "cmta/gru.hpp"
#include "cmta/head.hpp"

namespace cmta {

struct ModelConfig {
  std::size_t clip_len = 8;     // T
  std::size_t visual_dim = 512; // d_v
  std::size_t text_dim = 512;   // d_e
  std::size_t hidden = 256;     // H, GRU state
  std::size_t model_dim = 256;  // D, encoder width
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t ff_dim = 0;       // 0 selects 4·D
  Real dropout = 0;
  Variant variant = Variant::kFull;

  void validate() const;
  std::size_t ff_width() const { return ff_dim ? ff_dim : 4 * model_dim; }
  bool uses_coarse() const { return variant == Variant::kFull || variant == Variant::kVtCgtm; }
  bool uses_fine() const { return variant != Variant::kVtCgtm; }
  // Width of the per-frame vector fed to the projection.
  std::size_t projection_input() const;
  // Width of the representation fed to the head.
  std::size_t fusion_width() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Every variant carries the full set of groups; groups the variant does not
// use are never bound into the graph and keep a zero gradient.
template <class T>
struct ModelParamsT {
  GruParamsT<T> gru;
  EncoderParamsT<T> encoder;
  HeadParamsT<T> head;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    auto prefixed = [&f](const char* prefix) {
      return [&f, prefix](const auto& name, auto& slot, ParamKind kind) {
        f(std::string(prefix) + std::string(name), slot, kind);
      };
    };
    GruParamsT<T>::visit(self.gru, prefixed("gru."));
    EncoderParamsT<T>::visit(self.encoder, prefixed("encoder."));
    HeadParamsT<T>::visit(self.head, prefixed("head."));
  }
};

using ModelParams = ModelParamsT<Tensor>;
using ModelVars = ModelParamsT<ad::Var>;

// Zero weights and biases, unit LayerNorm gains, shaped for `config`.
ModelParams make_params(const ModelConfig& config);
// ConfigError when any tensor's shape disagrees with `config`.
void check_params(const ModelConfig& config, const ModelParams& params);
ModelParams zeros_like(const ModelParams& params);
std::size_t parameter_count(const ModelParams& params);

ModelVars bind(ad::Tape& tape, const ModelParams& params, bool trainable);
// Adds each bound variable's gradient into the matching slot of `grads`.
void accumulate_grads(const ad::Tape& tape, const ModelVars& vars, ModelParams& grads);

struct ForwardOptions {
  bool trainable_embeddings = false;
  std::mt19937_64* rng = nullptr;  // dropout source; dropout is skipped without one
};

struct ForwardResult {
  ad::Var features;  // representation fed to the head, [1×D_f]
  ad::Var probs;     // (p_real, p_fake), [1×2]
};

// Clip must already be T frames long.
ForwardResult forward(ad::Tape& tape, const ModelVars& vars, const ModelConfig& config, const EmbeddingClip& clip,
                      const ForwardOptions& options = {});

// Inference conveniences.
std::pair<Real, Real> forward_variant(const EmbeddingClip& clip, const ModelParams& params, const ModelConfig& config);
Tensor extract_features(const EmbeddingClip& clip, const ModelParams& params, const ModelConfig& config);

}  // namespace cmta
