#include "cmta/model.hpp"

#include "cmta/errors.hpp"
#include "cmta/similarity.hpp"

namespace cmta {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(clip_len, "clip_len");
  positive(visual_dim, "visual_dim");
  positive(text_dim, "text_dim");
  positive(hidden, "hidden");
  positive(model_dim, "model_dim");
  positive(heads, "heads");
  if (model_dim % heads != 0) {
    throw ConfigError("model_dim " + std::to_string(model_dim) + " is not divisible by heads " + std::to_string(heads));
  }
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
  if (uses_coarse() && visual_dim != text_dim) {
    throw ConfigError("variant " + to_string(variant) + " needs paired embeddings but d_v=" +
                      std::to_string(visual_dim) + ", d_e=" + std::to_string(text_dim));
  }
}

std::size_t ModelConfig::projection_input() const {
  switch (variant) {
    case Variant::kVOnly: return visual_dim;
    case Variant::kTOnly: return text_dim;
    default: return visual_dim + text_dim;
  }
}

std::size_t ModelConfig::fusion_width() const {
  switch (variant) {
    case Variant::kFull: return hidden + model_dim;
    case Variant::kVtCgtm: return hidden;
    default: return model_dim;
  }
}

ModelParams make_params(const ModelConfig& config) {
  config.validate();
  ModelParams p;
  p.gru = make_gru_params(config.hidden);
  p.encoder = make_encoder_params({config.projection_input(), config.clip_len, config.model_dim, config.ff_width(),
                                   config.layers});
  p.head = make_head_params(config.fusion_width());
  return p;
}

void check_params(const ModelConfig& config, const ModelParams& params) {
  const ModelParams expected = make_params(config);
  std::vector<std::pair<std::string, Shape>> want;
  ModelParams::visit(expected, [&](const std::string& name, const Tensor& t, ParamKind) {
    want.emplace_back(name, t.shape());
  });
  std::size_t i = 0;
  bool count_ok = true;
  ModelParams::visit(params, [&](const std::string& name, const Tensor& t, ParamKind) {
    if (i >= want.size()) {
      count_ok = false;
      return;
    }
    if (want[i].first != name || want[i].second != t.shape()) {
      throw ConfigError("parameter " + name + " has shape " + shape_string(t.shape()) + ", variant " +
                        to_string(config.variant) + " expects " + want[i].first + " " + shape_string(want[i].second));
    }
    ++i;
  });
  if (!count_ok || i != want.size()) throw ConfigError("parameter set does not match the configured layer count");
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z = params;
  ModelParams::visit(z, [](const auto&, Tensor& t, ParamKind) { t.fill(Real(0)); });
  return z;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  ModelParams::visit(params, [&](const auto&, const Tensor& t, ParamKind) { n += t.size(); });
  return n;
}

ModelVars bind(ad::Tape& tape, const ModelParams& params, bool trainable) {
  ModelVars vars;
  vars.encoder.layers.resize(params.encoder.layers.size());
  map_slots(vars, params, [&](const Tensor& t) { return trainable ? tape.leaf_ref(t) : tape.constant_ref(t); });
  return vars;
}

void accumulate_grads(const ad::Tape& tape, const ModelVars& vars, ModelParams& grads) {
  auto from = slots<const ad::Var>(vars);
  auto to = slots<Tensor>(grads);
  if (from.size() != to.size()) throw ConfigError("gradient buffer does not match the bound parameters");
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (from[i]->valid() && tape.has_grad(from[i]->index())) to[i]->add_inplace(tape.grad(*from[i]));
  }
}

ForwardResult forward(ad::Tape& tape, const ModelVars& vars, const ModelConfig& config, const EmbeddingClip& clip,
                      const ForwardOptions& options) {
  clip.validate();
  if (clip.frames() != config.clip_len) {
    throw ConfigError("clip " + clip.clip_id + " has " + std::to_string(clip.frames()) + " frames, model expects " +
                      std::to_string(config.clip_len));
  }
  if (clip.visual_dim() != config.visual_dim || clip.text_dim() != config.text_dim) {
    throw ConfigError("clip " + clip.clip_id + " has d_v=" + std::to_string(clip.visual_dim()) +
                      ", d_e=" + std::to_string(clip.text_dim()) + "; model expects d_v=" +
                      std::to_string(config.visual_dim) + ", d_e=" + std::to_string(config.text_dim));
  }
  const ad::Var visual =
      options.trainable_embeddings ? tape.leaf_ref(clip.visual) : tape.constant_ref(clip.visual);
  const ad::Var textual =
      options.trainable_embeddings ? tape.leaf_ref(clip.textual) : tape.constant_ref(clip.textual);

  ad::Var coarse, fine;
  if (config.uses_coarse()) coarse = gru_forward(similarity_sequence(visual, textual), vars.gru);
  if (config.uses_fine()) {
    ad::Var frames;
    switch (config.variant) {
      case Variant::kVOnly: frames = visual; break;
      case Variant::kTOnly: frames = textual; break;
      default: frames = ad::concat_cols({visual, textual}); break;
    }
    const EncoderRun run{config.heads, options.rng ? config.dropout : Real(0), options.rng};
    fine = temporal_pool(encoder_forward(embed_sequence(frames, vars.encoder), vars.encoder, run));
  }

  ad::Var features;
  switch (config.variant) {
    case Variant::kFull: features = fuse(coarse, fine, config.variant); break;
    case Variant::kVtCgtm: features = coarse; break;
    default: features = fine; break;
  }
  return {features, classify(features, vars.head)};
}

std::pair<Real, Real> forward_variant(const EmbeddingClip& clip, const ModelParams& params,
                                      const ModelConfig& config) {
  check_params(config, params);
  ad::Tape tape;
  const ModelVars vars = bind(tape, params, false);
  const Tensor& probs = forward(tape, vars, config, clip).probs.value();
  return {probs[0], probs[1]};
}

Tensor extract_features(const EmbeddingClip& clip, const ModelParams& params, const ModelConfig& config) {
  ad::Tape tape;
  const ModelVars vars = bind(tape, params, false);
  return forward(tape, vars, config, clip).features.value();
}

}  // namespace cmta
