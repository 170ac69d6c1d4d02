#include "doctest.h"

#include <cmath>
#include <random>

#include "cmta/errors.hpp"
#include "cmta/optim.hpp"
#include "oracles.hpp"

using namespace cmta;

namespace {

ModelConfig small() {
  ModelConfig c;
  c.clip_len = 8;
  c.visual_dim = c.text_dim = 6;
  c.hidden = 5;
  c.model_dim = 4;
  c.layers = 2;
  c.heads = 2;
  return c;
}

// Reference recurrences, one parameter at a time.
struct RefAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double p, double g, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    return p - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace

TEST_CASE("xavier initialization bounds and zero biases") {
  std::mt19937_64 rng(1);
  Tensor w({4, 4});
  xavier_uniform(w, rng);
  for (Real v : w.values()) CHECK(std::abs(v) <= std::sqrt(6.0 / 8));

  const ModelParams p = init_params(small(), rng);
  ModelParams::visit(p, [](const std::string& name, const Tensor& t, ParamKind kind) {
    CAPTURE(name);
    if (kind == ParamKind::kBias)
      for (Real v : t.values()) CHECK(v == 0);
    if (kind == ParamKind::kGain)
      for (Real v : t.values()) CHECK(v == 1);
    if (kind == ParamKind::kWeight) {
      const double bound = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
      double peak = 0;
      for (Real v : t.values()) peak = std::max(peak, std::abs(static_cast<double>(v)));
      CHECK(peak <= bound);
      CHECK(peak > 0.5 * bound);
    }
  });
  CHECK(p.gru.w_z.shape() == Shape{5, 6});
  CHECK(p.encoder.pos.shape() == Shape{8, 4});
}

TEST_CASE("initialization is deterministic per seed") {
  std::mt19937_64 a(42), b(42), c(43);
  const ModelParams pa = init_params(small(), a), pb = init_params(small(), b), pc = init_params(small(), c);
  CHECK(slots<const Tensor>(pa).size() == slots<const Tensor>(pb).size());
  bool same = true, differ = false;
  const auto sa = slots<const Tensor>(pa), sb = slots<const Tensor>(pb), sc = slots<const Tensor>(pc);
  for (std::size_t i = 0; i < sa.size(); ++i) {
    same = same && *sa[i] == *sb[i];
    differ = differ || *sa[i] != *sc[i];
  }
  CHECK(same);
  CHECK(differ);
}

TEST_CASE("adam examples") {
  Tensor p = Tensor::vector({1, -2, 3});
  const Tensor zero({3});
  std::vector<Tensor*> params{&p};
  std::vector<const Tensor*> grads{&zero};
  AdamState s = AdamState::for_params(std::span<const Tensor* const>(grads));
  adam_step(params, grads, s, 1e-3);
  CHECK(p == Tensor::vector({1, -2, 3}));

  Tensor q = Tensor::vector({0, 0, 0});
  const Tensor g = Tensor::vector({0.3, -5, 1e-3});
  std::vector<Tensor*> qp{&q};
  std::vector<const Tensor*> qg{&g};
  AdamState t = AdamState::for_params(std::span<const Tensor* const>(qg));
  adam_step(qp, qg, t, 1e-2);
  CHECK(q[0] == doctest::Approx(-1e-2).epsilon(1e-6));
  CHECK(q[1] == doctest::Approx(1e-2).epsilon(1e-6));
  CHECK(q[2] == doctest::Approx(-1e-2).epsilon(1e-4));
  CHECK(t.step == 1);
}

TEST_CASE("adam matches the reference recurrence") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor p({2, 3}), g({2, 3});
    oracle::fill_normal(p, rng);
    std::vector<RefAdam> ref(6);
    std::vector<double> want(p.values().begin(), p.values().end());
    std::vector<Tensor*> params{&p};
    std::vector<const Tensor*> grads{&g};
    AdamState s = AdamState::for_params(std::span<const Tensor* const>(grads), 0.8, 0.99, 1e-6);
    for (int step = 0; step < 5; ++step) {
      oracle::fill_normal(g, rng);
      const double lr = 0.01 * (step + 1);
      adam_step(params, grads, s, lr);
      for (std::size_t i = 0; i < 6; ++i) want[i] = ref[i].step(want[i], g[i], lr, 0.8, 0.99, 1e-6);
      for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(p[i] - want[i]) < 1e-12);
    }
  }
}

TEST_CASE("adam rejects non-finite gradients and names the parameter") {
  std::mt19937_64 rng(6);
  ModelParams p = init_params(small(), rng);
  const ModelParams before = p;
  ModelParams g = zeros_like(p);
  g.encoder.layers[1].w_2[3] = std::numeric_limits<Real>::quiet_NaN();
  AdamState s = AdamState::for_params(p);
  try {
    adam_step(p, g, s, 1e-3);
    FAIL("expected a non-finite error");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("encoder.layers.1.w_2") != std::string::npos);
  }
  CHECK(s.step == 0);
  CHECK(p.encoder.layers[1].w_2 == before.encoder.layers[1].w_2);
}

TEST_CASE("scheduler examples") {
  PlateauScheduler rising(1e-4);
  for (int e = 0; e < 10; ++e) CHECK(rising.step(0.5 + 0.01 * e) == 1e-4);

  PlateauScheduler flat(1e-4);
  std::vector<double> lrs;
  for (int e = 0; e < 6; ++e) lrs.push_back(flat.step(0.7));
  // The first epoch sets the best; five further epochs without improvement
  // trigger one reduction.
  CHECK(lrs == std::vector<double>{1e-4, 1e-4, 1e-4, 1e-4, 1e-4, 5e-5});

  PlateauScheduler two(1e-4);
  for (int e = 0; e < 11; ++e) two.step(0.7);
  CHECK(two.lr() == 2.5e-5);
  CHECK(two.state().reductions == 2);
}

TEST_CASE("scheduler threshold is relative to the best value") {
  PlateauScheduler s(1.0, 0.5, 1, 1e-4);
  s.step(0.5);
  CHECK(s.step(0.5 + 0.4e-4) == 0.5);
  PlateauScheduler t(1.0, 0.5, 1, 1e-4);
  t.step(0.5);
  CHECK(t.step(0.5 + 0.6e-4) == 1.0);
}

TEST_CASE("scheduler rate is always a power-of-factor multiple of the start") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int rep = 0; rep < 50; ++rep) {
    PlateauScheduler s(1e-4, 0.5, 1 + rep % 5);
    double prev = 1e-4;
    for (int e = 0; e < 60; ++e) {
      const double lr = s.step(u(rng) < 0.3 ? 0.9 + 0.001 * e : u(rng));
      CHECK(lr <= prev);
      const double k = std::log2(1e-4 / lr);
      CHECK(std::abs(k - std::round(k)) < 1e-9);
      CHECK(lr == 1e-4 * std::pow(0.5, s.state().reductions));
      prev = lr;
    }
  }
}

TEST_CASE("scheduler resumes from saved state") {
  PlateauScheduler a(1e-3, 0.5, 3);
  for (double m : {0.1, 0.2, 0.2, 0.2}) a.step(m);
  PlateauScheduler b(a.state(), 0.5, 3, 1e-4);
  for (double m : {0.2, 0.15, 0.3, 0.1}) CHECK(a.step(m) == b.step(m));
  CHECK(a.state() == b.state());
}

TEST_CASE("scheduler rejects invalid settings") {
  CHECK_THROWS_AS(PlateauScheduler(1e-3, 0.5, 0), ConfigError);
  CHECK_THROWS_AS(PlateauScheduler(1e-3, 1.0, 5), ConfigError);
  CHECK_THROWS_AS(PlateauScheduler(0, 0.5, 5), ConfigError);
}
