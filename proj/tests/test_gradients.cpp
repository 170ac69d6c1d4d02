#include "doctest.h"

#include <random>

#include "cmta/grad_check.hpp"
#include "cmta/model.hpp"
#include "cmta/optim.hpp"
#include "cmta/trainer.hpp"

using namespace cmta;

namespace {

EmbeddingClip random_clip(std::size_t frames, std::size_t dv, std::size_t de, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  EmbeddingClip c;
  c.clip_id = "c";
  c.visual = Tensor({frames, dv});
  c.textual = Tensor({frames, de});
  for (auto& x : c.visual.values()) x = n(rng);
  for (auto& x : c.textual.values()) x = n(rng);
  c.label = Label::kFake;
  return c;
}

ModelConfig small_config(Variant v) {
  ModelConfig c;
  c.clip_len = 4;
  c.visual_dim = c.text_dim = 8;
  c.hidden = c.model_dim = 8;
  c.layers = 1;
  c.heads = 2;
  c.variant = v;
  return c;
}

}  // namespace

TEST_CASE("model gradients match finite differences for every variant") {
  for (Variant v : {Variant::kFull, Variant::kVOnly, Variant::kTOnly, Variant::kVtCgtm, Variant::kVtFgtm}) {
    CAPTURE(to_string(v));
    const ModelConfig config = small_config(v);
    std::mt19937_64 rng(11);
    ModelParams params = init_params(config, rng);
    EmbeddingClip clip = random_clip(4, 8, 8, rng);
    std::vector<Tensor*> tensors = slots<Tensor>(params);
    auto loss = [&](ad::Tape& tape, const std::vector<ad::Var>& leaves) {
      ModelVars vars;
      vars.encoder.layers.resize(config.layers);
      std::size_t i = 0;
      ModelVars::visit(vars, [&](const auto&, ad::Var& slot, ParamKind) { slot = leaves[i++]; });
      return bce_loss(forward(tape, vars, config, clip).probs, clip.label);
    };
    const auto r = ad::grad_check(loss, tensors);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("parameters outside the active variant get exactly zero gradient") {
  for (Variant v : {Variant::kFull, Variant::kVOnly, Variant::kTOnly, Variant::kVtCgtm, Variant::kVtFgtm}) {
    CAPTURE(to_string(v));
    const ModelConfig config = small_config(v);
    std::mt19937_64 rng(3);
    const ModelParams params = init_params(config, rng);
    std::vector<EmbeddingClip> clips;
    for (int i = 0; i < 4; ++i) {
      clips.push_back(random_clip(4, 8, 8, rng));
      clips.back().label = i % 2 ? Label::kFake : Label::kReal;
    }
    std::vector<const EmbeddingClip*> batch;
    for (const auto& c : clips) batch.push_back(&c);
    ModelParams grads = zeros_like(params);
    batch_loss_and_grads(params, config, batch, grads);

    ModelParams::visit(grads, [&](const std::string& name, const Tensor& g, ParamKind) {
      const bool coarse = name.rfind("gru.", 0) == 0, fine = name.rfind("encoder.", 0) == 0;
      const bool used = (coarse && config.uses_coarse()) || (fine && config.uses_fine()) || (!coarse && !fine);
      bool any = false;
      for (Real x : g.values()) any = any || x != 0;
      CAPTURE(name);
      if (!used) CHECK(!any);
      // LayerNorm shifts and the final biases of the last layer can be flat
      // for a given batch, but every weight of an active branch must move.
      if (used && name.find("w_") != std::string::npos) CHECK(any);
    });
  }
}
