#include "cmta/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cmta/errors.hpp"

namespace cmta {

namespace {

struct RowCosine {
  Real value;
  Real dot;
  Real norm_v;  // guarded
  Real norm_e;  // guarded
  bool v_guarded;
  bool e_guarded;
};

RowCosine row_cosine(const Real* v, const Real* e, std::size_t d) {
  Real dot = 0, vv = 0, ee = 0;
  for (std::size_t i = 0; i < d; ++i) {
    dot += v[i] * e[i];
    vv += v[i] * v[i];
    ee += e[i] * e[i];
  }
  const Real nv_raw = std::sqrt(vv), ne_raw = std::sqrt(ee);
  const Real nv = std::max(nv_raw, kCosineEps), ne = std::max(ne_raw, kCosineEps);
  return {dot / (nv * ne), dot, nv, ne, nv_raw < kCosineEps, ne_raw < kCosineEps};
}

}  // namespace

Real cosine(std::span<const Real> v, std::span<const Real> e) {
  if (v.size() != e.size()) {
    throw ConfigError("cosine: dimension mismatch " + std::to_string(v.size()) + " vs " + std::to_string(e.size()));
  }
  return row_cosine(v.data(), e.data(), v.size()).value;
}

Real cosine(const Tensor& v, const Tensor& e) { return cosine(v.values(), e.values()); }

ad::Var similarity_sequence(ad::Var visual, ad::Var textual) {
  const Tensor& vv = visual.value();
  const Tensor& ev = textual.value();
  if (vv.cols() != ev.cols()) {
    throw ConfigError("similarity requires paired embedding spaces: d_v=" + std::to_string(vv.cols()) +
                      " but d_e=" + std::to_string(ev.cols()));
  }
  if (vv.rows() != ev.rows()) {
    throw ConfigError("similarity: " + std::to_string(vv.rows()) + " visual frames vs " + std::to_string(ev.rows()) +
                      " textual frames");
  }
  const std::size_t t_len = vv.rows(), d = vv.cols();
  std::vector<RowCosine> rows(t_len);
  Tensor s({t_len, 1});
  for (std::size_t t = 0; t < t_len; ++t) {
    rows[t] = row_cosine(vv.data() + t * d, ev.data() + t * d, d);
    s[t] = rows[t].value;
  }
  return visual.tape()->record(
      std::move(s), {visual, textual}, [visual, textual, rows, t_len, d](ad::Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad_buffer(self);
        const Tensor& vv = visual.value();
        const Tensor& ev = textual.value();
        // dc/dv = e/(|v||e|) - c·v/|v|² when |v| is above the guard; the
        // guarded norm is constant otherwise.
        auto propagate = [&](ad::Var target, const Tensor& self_mat, const Tensor& other_mat, bool target_is_v) {
          if (!target.requires_grad()) return;
          Tensor& dst = tape.grad_buffer(target.index());
          for (std::size_t t = 0; t < t_len; ++t) {
            const RowCosine& rc = rows[t];
            const Real own_norm = target_is_v ? rc.norm_v : rc.norm_e;
            const bool guarded = target_is_v ? rc.v_guarded : rc.e_guarded;
            const Real a = g[t] / (rc.norm_v * rc.norm_e);
            const Real b = guarded ? Real(0) : g[t] * rc.value / (own_norm * own_norm);
            const Real* x = self_mat.data() + t * d;
            const Real* y = other_mat.data() + t * d;
            Real* out = dst.data() + t * d;
            for (std::size_t i = 0; i < d; ++i) out[i] += a * y[i] - b * x[i];
          }
        };
        propagate(visual, vv, ev, true);
        propagate(textual, ev, vv, false);
      });
}

Tensor similarity_sequence(const EmbeddingClip& clip) {
  clip.validate();
  ad::Tape tape;
  return similarity_sequence(tape.constant_ref(clip.visual), tape.constant_ref(clip.textual)).value();
}

}  // namespace cmta
