#pragma once

#include "cmta/autodiff.hpp"
#include "cmta/params.hpp"

namespace cmta {

// Single-layer GRU over the scalar similarity sequence. Gate weights act on
// [h_{t−1}, s_t] and are stored [H×(H+1)].
template <class T>
struct GruParamsT {
  T w_z, w_r, w_h;
  T b_z, b_r, b_h;

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("w_z", self.w_z, ParamKind::kWeight);
    f("w_r", self.w_r, ParamKind::kWeight);
    f("w_h", self.w_h, ParamKind::kWeight);
    f("b_z", self.b_z, ParamKind::kBias);
    f("b_r", self.b_r, ParamKind::kBias);
    f("b_h", self.b_h, ParamKind::kBias);
  }
};

using GruParams = GruParamsT<Tensor>;
using GruVars = GruParamsT<ad::Var>;

// Zero-valued parameters for hidden size H.
GruParams make_gru_params(std::size_t hidden);

//   z = σ(W_z·[h, s] + b_z)
//   r = σ(W_r·[h, s] + b_r)
//   h̃ = tanh(W_h·[r⊙h, s] + b_h)
//   h' = (1−z)⊙h + z⊙h̃
ad::Var gru_cell(ad::Var h_prev, ad::Var s_t, const GruVars& params);

// Folds gru_cell over a [T×1] sequence from h_0 ([1×H]) and returns h_T.
ad::Var gru_forward(ad::Var sequence, const GruVars& params, ad::Var h0);
// Same, starting from the zero state.
ad::Var gru_forward(ad::Var sequence, const GruVars& params);

GruVars bind_constant(ad::Tape& tape, const GruParams& params);

// Value-level conveniences for inference and examples.
Tensor gru_cell(const Tensor& h_prev, Real s_t, const GruParams& params);
Tensor gru_forward(const Tensor& sequence, const GruParams& params, const Tensor& h0);

}  // namespace cmta
