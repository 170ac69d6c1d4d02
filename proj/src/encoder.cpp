#include "cmta/encoder.hpp"

#include <cmath>

#include "cmta/errors.hpp"

namespace cmta {

EncoderParams make_encoder_params(const EncoderShape& shape) {
  if (shape.input_dim == 0 || shape.clip_len == 0 || shape.model_dim == 0 || shape.ff_dim == 0) {
    throw ConfigError("encoder extents must be positive");
  }
  const std::size_t d = shape.model_dim, f = shape.ff_dim;
  EncoderParams p;
  p.w_p = Tensor({d, shape.input_dim});
  p.b_p = Tensor({d});
  p.pos = Tensor({shape.clip_len, d});
  p.layers.resize(shape.layers);
  for (auto& layer : p.layers) {
    for (Tensor* w : {&layer.w_q, &layer.w_k, &layer.w_v, &layer.w_o}) *w = Tensor({d, d});
    for (Tensor* b : {&layer.b_q, &layer.b_k, &layer.b_v, &layer.b_o, &layer.ln1_beta, &layer.ln2_beta, &layer.b_2}) {
      *b = Tensor({d});
    }
    layer.ln1_gamma = Tensor({d}, Real(1));
    layer.ln2_gamma = Tensor({d}, Real(1));
    layer.w_1 = Tensor({f, d});
    layer.b_1 = Tensor({f});
    layer.w_2 = Tensor({d, f});
  }
  return p;
}

Tensor fuse_frame(const Tensor& visual, const Tensor& textual) {
  if (visual.empty() || textual.empty()) throw ConfigError("fuse_frame: both modalities must be non-empty");
  std::vector<Real> out(visual.values().begin(), visual.values().end());
  out.insert(out.end(), textual.values().begin(), textual.values().end());
  const std::size_t n = out.size();
  return Tensor({n}, std::move(out));
}

ad::Var embed_sequence(ad::Var frames, const EncoderVars& params) {
  const Tensor& x = frames.value();
  const Tensor& pos = params.pos.value();
  if (x.rows() != pos.rows()) {
    throw ConfigError("clip has " + std::to_string(x.rows()) + " frames but the positional embedding is bound to " +
                      std::to_string(pos.rows()));
  }
  if (x.cols() != params.w_p.value().cols()) {
    throw ConfigError("projection expects " + std::to_string(params.w_p.value().cols()) + "-wide frames, got " +
                      std::to_string(x.cols()));
  }
  return ad::add(ad::linear(frames, params.w_p, params.b_p), params.pos);
}

ad::Var self_attention(ad::Var u, const EncoderLayerVars& layer, std::size_t heads, std::vector<Tensor>* weights) {
  const std::size_t d = u.value().cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("model dim " + std::to_string(d) + " is not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t dk = d / heads;
  const Real inv_sqrt_dk = Real(1) / std::sqrt(static_cast<Real>(dk));
  const ad::Var q = ad::linear(u, layer.w_q, layer.b_q);
  const ad::Var k = ad::linear(u, layer.w_k, layer.b_k);
  const ad::Var v = ad::linear(u, layer.w_v, layer.b_v);
  std::vector<ad::Var> outputs;
  outputs.reserve(heads);
  if (weights) weights->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const ad::Var qh = ad::slice_cols(q, h * dk, dk);
    const ad::Var kh = ad::slice_cols(k, h * dk, dk);
    const ad::Var vh = ad::slice_cols(v, h * dk, dk);
    const ad::Var attn = ad::softmax(ad::scale(ad::matmul_nt(qh, kh), inv_sqrt_dk), 1);
    if (weights) weights->push_back(attn.value());
    outputs.push_back(ad::matmul(attn, vh));
  }
  const ad::Var merged = heads == 1 ? outputs[0] : ad::concat_cols(outputs);
  return ad::linear(merged, layer.w_o, layer.b_o);
}

ad::Var encoder_layer(ad::Var u, const EncoderLayerVars& layer, const EncoderRun& run) {
  auto drop = [&](ad::Var x) {
    if (run.dropout == 0) return x;
    if (!run.rng) throw ConfigError("dropout requires a random generator");
    return ad::dropout(x, run.dropout, *run.rng);
  };
  const ad::Var attended = drop(self_attention(u, layer, run.heads));
  u = ad::layer_norm(ad::add(u, attended), layer.ln1_gamma, layer.ln1_beta);
  const ad::Var hidden = ad::relu(ad::linear(u, layer.w_1, layer.b_1));
  const ad::Var ff = drop(ad::linear(hidden, layer.w_2, layer.b_2));
  return ad::layer_norm(ad::add(u, ff), layer.ln2_gamma, layer.ln2_beta);
}

ad::Var encoder_forward(ad::Var u0, const EncoderVars& params, const EncoderRun& run) {
  ad::Var u = u0;
  for (const auto& layer : params.layers) u = encoder_layer(u, layer, run);
  return u;
}

ad::Var temporal_pool(ad::Var u) { return ad::mean(u, 0); }

EncoderVars bind_constant(ad::Tape& tape, const EncoderParams& params) {
  EncoderVars vars;
  vars.layers.resize(params.layers.size());
  map_slots(vars, params, [&](const Tensor& t) { return tape.constant_ref(t); });
  return vars;
}

}  // namespace cmta
