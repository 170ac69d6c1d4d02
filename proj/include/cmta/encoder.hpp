#pragma once

#include <random>
#include <string>
#include <vector>

#include "cmta/autodiff.hpp"
#include "cmta/params.hpp"

namespace cmta {

// One post-norm encoder layer: multi-head self-attention with output
// projection, then a ReLU feed-forward block, each followed by a residual
// add and LayerNorm. Projections are stored [out×in] and applied as x·Wᵀ+b.
template <class T>
struct EncoderLayerT {
  T w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
  T ln1_gamma, ln1_beta;
  T w_1, b_1, w_2, b_2;
  T ln2_gamma, ln2_beta;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("w_q", self.w_q, ParamKind::kWeight);
    f("b_q", self.b_q, ParamKind::kBias);
    f("w_k", self.w_k, ParamKind::kWeight);
    f("b_k", self.b_k, ParamKind::kBias);
    f("w_v", self.w_v, ParamKind::kWeight);
    f("b_v", self.b_v, ParamKind::kBias);
    f("w_o", self.w_o, ParamKind::kWeight);
    f("b_o", self.b_o, ParamKind::kBias);
    f("ln1_gamma", self.ln1_gamma, ParamKind::kGain);
    f("ln1_beta", self.ln1_beta, ParamKind::kBias);
    f("w_1", self.w_1, ParamKind::kWeight);
    f("b_1", self.b_1, ParamKind::kBias);
    f("w_2", self.w_2, ParamKind::kWeight);
    f("b_2", self.b_2, ParamKind::kBias);
    f("ln2_gamma", self.ln2_gamma, ParamKind::kGain);
    f("ln2_beta", self.ln2_beta, ParamKind::kBias);
  }
};

// Frame projection [D×in], learnable positional embedding [T×D], and the
// encoder stack.
template <class T>
struct EncoderParamsT {
  T w_p, b_p, pos;
  std::vector<EncoderLayerT<T>> layers;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("w_p", self.w_p, ParamKind::kWeight);
    f("b_p", self.b_p, ParamKind::kBias);
    f("pos", self.pos, ParamKind::kWeight);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      const std::string prefix = "layers." + std::to_string(l) + ".";
      EncoderLayerT<T>::visit(self.layers[l], [&](const std::string& name, auto& slot, ParamKind kind) {
        f(prefix + name, slot, kind);
      });
    }
  }
};

using EncoderLayer = EncoderLayerT<Tensor>;
using EncoderLayerVars = EncoderLayerT<ad::Var>;
using EncoderParams = EncoderParamsT<Tensor>;
using EncoderVars = EncoderParamsT<ad::Var>;

struct EncoderShape {
  std::size_t input_dim = 0;  // d_v + d_e for the full model
  std::size_t clip_len = 8;   // T
  std::size_t model_dim = 256;
  std::size_t ff_dim = 1024;
  std::size_t layers = 2;
};

// Zero weights, unit LayerNorm gains.
EncoderParams make_encoder_params(const EncoderShape& shape);

// x_t = [v_t; e_t], visual first.
Tensor fuse_frame(const Tensor& visual, const Tensor& textual);

// U_0[t] = W_p·x_t + b_p + P[t] for frames x [T×in].
ad::Var embed_sequence(ad::Var frames, const EncoderVars& params);

// Multi-head scaled dot-product self-attention with output projection.
// When `weights` is non-null it receives each head's [T×T] attention matrix.
ad::Var self_attention(ad::Var u, const EncoderLayerVars& layer, std::size_t heads,
                       std::vector<Tensor>* weights = nullptr);

struct EncoderRun {
  std::size_t heads = 4;
  Real dropout = 0;
  std::mt19937_64* rng = nullptr;  // required when dropout > 0
};

ad::Var encoder_layer(ad::Var u, const EncoderLayerVars& layer, const EncoderRun& run);
ad::Var encoder_forward(ad::Var u0, const EncoderVars& params, const EncoderRun& run);

// Mean over frames: [T×D] → [1×D].
ad::Var temporal_pool(ad::Var u);

EncoderVars bind_constant(ad::Tape& tape, const EncoderParams& params);

}  // namespace cmta
