#include "doctest.h"

#include <cmath>
#include <random>

#include "cmta/errors.hpp"
#include "cmta/model.hpp"
#include "cmta/optim.hpp"
#include "oracles.hpp"

using namespace cmta;

namespace {

ModelConfig tiny(Variant v) {
  ModelConfig c;
  c.clip_len = 4;
  c.visual_dim = c.text_dim = 6;
  c.hidden = 5;
  c.model_dim = 4;
  c.layers = 1;
  c.heads = 2;
  c.variant = v;
  return c;
}

EmbeddingClip random_clip(const ModelConfig& c, std::mt19937_64& rng) {
  EmbeddingClip clip;
  clip.clip_id = "c";
  clip.visual = Tensor({c.clip_len, c.visual_dim});
  clip.textual = Tensor({c.clip_len, c.text_dim});
  oracle::fill_normal(clip.visual, rng);
  oracle::fill_normal(clip.textual, rng);
  return clip;
}

const Variant kAll[] = {Variant::kFull, Variant::kVOnly, Variant::kTOnly, Variant::kVtCgtm, Variant::kVtFgtm};

}  // namespace

TEST_CASE("variant names round trip") {
  for (Variant v : kAll) CHECK(parse_variant(to_string(v)) == v);
  CHECK(to_string(Variant::kVtCgtm) == "vt-cgtm");
  CHECK_THROWS_AS(parse_variant("both"), ConfigError);
}

TEST_CASE("fuse examples") {
  ad::Tape tape;
  const ad::Var a = tape.constant(Tensor::from_rows({{1}})), b = tape.constant(Tensor::from_rows({{2, 3}}));
  CHECK(fuse(a, b, Variant::kFull).value() == Tensor::from_rows({{1, 2, 3}}));
  CHECK(fuse(tape.constant(Tensor({1, 256})), tape.constant(Tensor({1, 256})), Variant::kFull).value() ==
        Tensor({1, 512}));
  CHECK_THROWS_AS(fuse(a, b, Variant::kVtFgtm), ConfigError);
}

TEST_CASE("classify examples") {
  ad::Tape tape;
  HeadParams h = make_head_params(3);
  const ad::Var x = tape.constant(Tensor::from_rows({{0.3, -2, 7}}));
  CHECK(classify(x, bind_constant(tape, h)).value() == Tensor::from_rows({{0.5, 0.5}}));
  h.b[1] = std::log(Real(3));
  const Tensor p = classify(x, bind_constant(tape, h)).value();
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK_THROWS_AS(classify(tape.constant(Tensor({1, 4})), bind_constant(tape, h)), ConfigError);
}

TEST_CASE("classify is shift invariant and returns a distribution") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    HeadParams h = make_head_params(4);
    oracle::fill_normal(h.w, rng, 3);
    oracle::fill_normal(h.b, rng, 3);
    Tensor x({1, 4});
    oracle::fill_normal(x, rng);
    ad::Tape tape;
    const Tensor p = classify(tape.constant(x), bind_constant(tape, h)).value();
    CHECK(p[0] > 0);
    CHECK(p[1] < 1);
    CHECK(std::abs(p[0] + p[1] - 1) < 1e-6);
    HeadParams shifted = h;
    const Real shift = static_cast<Real>(std::normal_distribution<double>(0, 10)(rng));
    shifted.b[0] += shift;
    shifted.b[1] += shift;
    const Tensor q = classify(tape.constant(x), bind_constant(tape, shifted)).value();
    CHECK(std::abs(p[1] - q[1]) < 1e-6);
  }
}

TEST_CASE("bce examples") {
  CHECK(bce_loss(1 - kProbEps, Label::kFake) == doctest::Approx(0).epsilon(1e-6));
  CHECK(bce_loss(Real(0.5), Label::kFake) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce_loss(Real(0.5), Label::kReal) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(std::isfinite(bce_loss(Real(0), Label::kFake)));
  CHECK(bce_loss(Real(0), Label::kFake) == doctest::Approx(-std::log(1e-7)));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 100; ++rep) CHECK(bce_loss(static_cast<Real>(u(rng)), rep % 2 ? Label::kFake : Label::kReal) >= 0);

  ad::Tape tape;
  const ad::Var probs = tape.constant(Tensor::from_rows({{0.2, 0.8}}));
  CHECK(bce_loss(probs, Label::kFake).value()[0] == doctest::Approx(-std::log(0.8)).epsilon(1e-12));
  CHECK(bce_loss(probs, Label::kReal).value()[0] == doctest::Approx(-std::log(0.2)).epsilon(1e-12));
}

TEST_CASE("head widths per variant") {
  ModelConfig c = tiny(Variant::kFull);
  c.hidden = c.model_dim = 256;
  CHECK(c.fusion_width() == 512);
  c.variant = Variant::kVtCgtm;
  CHECK(c.fusion_width() == 256);
  CHECK(make_params(c).head.w.shape() == Shape{2, 256});
  c.variant = Variant::kVOnly;
  CHECK(c.projection_input() == c.visual_dim);
  c.variant = Variant::kTOnly;
  CHECK(c.projection_input() == c.text_dim);
  c.variant = Variant::kVtFgtm;
  CHECK(c.projection_input() == c.visual_dim + c.text_dim);
}

TEST_CASE("zero parameters give an even split for every variant") {
  std::mt19937_64 rng(3);
  for (Variant v : kAll) {
    const ModelConfig c = tiny(v);
    const auto [p_real, p_fake] = forward_variant(random_clip(c, rng), make_params(c), c);
    CHECK(p_real == doctest::Approx(0.5));
    CHECK(p_fake == doctest::Approx(0.5));
  }
}

TEST_CASE("single-modality variants ignore the other modality") {
  std::mt19937_64 rng(4);
  for (Variant v : {Variant::kVOnly, Variant::kTOnly}) {
    const ModelConfig c = tiny(v);
    const ModelParams p = init_params(c, rng);
    const EmbeddingClip clip = random_clip(c, rng);
    EmbeddingClip perturbed = clip;
    Tensor& other = v == Variant::kVOnly ? perturbed.textual : perturbed.visual;
    oracle::fill_normal(other, rng, 5);
    CHECK(forward_variant(clip, p, c) == forward_variant(perturbed, p, c));
    Tensor& own = v == Variant::kVOnly ? perturbed.visual : perturbed.textual;
    oracle::fill_normal(own, rng, 5);
    CHECK(forward_variant(clip, p, c) != forward_variant(perturbed, p, c));
  }
}

TEST_CASE("variants with a coarse branch need paired dimensions") {
  ModelConfig c = tiny(Variant::kFull);
  c.text_dim = 7;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.variant = Variant::kVtFgtm;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("configuration checks") {
  ModelConfig c = tiny(Variant::kFull);
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(Variant::kFull);
  c.clip_len = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = tiny(Variant::kFull);
  c.dropout = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("parameters built for another variant are rejected") {
  std::mt19937_64 rng(5);
  const ModelConfig full = tiny(Variant::kFull), cgtm = tiny(Variant::kVtCgtm);
  const ModelParams p = make_params(full);
  CHECK_THROWS_AS(forward_variant(random_clip(full, rng), p, cgtm), ConfigError);
  CHECK_THROWS_AS(check_params(cgtm, p), ConfigError);
}

TEST_CASE("forward rejects clips of the wrong length or width") {
  std::mt19937_64 rng(6);
  const ModelConfig c = tiny(Variant::kFull);
  const ModelParams p = make_params(c);
  ModelConfig longer = c;
  longer.clip_len = 5;
  CHECK_THROWS_AS(forward_variant(random_clip(longer, rng), p, c), ConfigError);
  ModelConfig wider = c;
  wider.visual_dim = wider.text_dim = 7;
  try {
    forward_variant(random_clip(wider, rng), p, c);
    FAIL("expected a configuration error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("d_v=7") != std::string::npos);
  }
}

TEST_CASE("features are the fused representation") {
  std::mt19937_64 rng(7);
  for (Variant v : kAll) {
    const ModelConfig c = tiny(v);
    const ModelParams p = init_params(c, rng);
    const EmbeddingClip clip = random_clip(c, rng);
    const Tensor f = extract_features(clip, p, c);
    CHECK(f.size() == c.fusion_width());
    ad::Tape tape;
    const Tensor probs = classify(tape.constant(f), bind_constant(tape, p.head)).value();
    const auto [p_real, p_fake] = forward_variant(clip, p, c);
    CHECK(probs[0] == doctest::Approx(p_real).epsilon(1e-12));
    CHECK(probs[1] == doctest::Approx(p_fake).epsilon(1e-12));
  }
}

TEST_CASE("full features put the coarse state first") {
  std::mt19937_64 rng(8);
  const ModelConfig full = tiny(Variant::kFull);
  ModelConfig cgtm = full, fgtm = full;
  cgtm.variant = Variant::kVtCgtm;
  fgtm.variant = Variant::kVtFgtm;
  const ModelParams p = init_params(full, rng);
  ModelParams pc = make_params(cgtm), pf = make_params(fgtm);
  pc.gru = pf.gru = p.gru;
  pc.encoder = pf.encoder = p.encoder;
  const EmbeddingClip clip = random_clip(full, rng);
  const Tensor f = extract_features(clip, p, full);
  const Tensor coarse = extract_features(clip, pc, cgtm), fine = extract_features(clip, pf, fgtm);
  for (std::size_t i = 0; i < full.hidden; ++i) CHECK(f[i] == coarse[i]);
  for (std::size_t i = 0; i < full.model_dim; ++i) CHECK(f[full.hidden + i] == fine[i]);
}
