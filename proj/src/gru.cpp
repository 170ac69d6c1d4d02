#include "cmta/gru.hpp"

#include "cmta/errors.hpp"

namespace cmta {

GruParams make_gru_params(std::size_t hidden) {
  if (hidden == 0) throw ConfigError("GRU hidden size must be positive");
  GruParams p;
  for (Tensor* w : {&p.w_z, &p.w_r, &p.w_h}) *w = Tensor({hidden, hidden + 1});
  for (Tensor* b : {&p.b_z, &p.b_r, &p.b_h}) *b = Tensor({hidden});
  return p;
}

ad::Var gru_cell(ad::Var h_prev, ad::Var s_t, const GruVars& params) {
  const std::size_t hidden = params.w_z.value().rows();
  if (h_prev.value().size() != hidden) {
    throw ConfigError("gru_cell: hidden state has " + std::to_string(h_prev.value().size()) + " entries, expected " +
                      std::to_string(hidden));
  }
  const ad::Var hs = ad::concat_cols({h_prev, s_t});
  const ad::Var z = ad::sigmoid(ad::linear(hs, params.w_z, params.b_z));
  const ad::Var r = ad::sigmoid(ad::linear(hs, params.w_r, params.b_r));
  const ad::Var gated = ad::concat_cols({ad::mul(r, h_prev), s_t});
  const ad::Var candidate = ad::tanh(ad::linear(gated, params.w_h, params.b_h));
  return ad::add(ad::mul(ad::one_minus(z), h_prev), ad::mul(z, candidate));
}

ad::Var gru_forward(ad::Var sequence, const GruVars& params, ad::Var h0) {
  const Tensor& seq = sequence.value();
  if (seq.empty() || seq.cols() != 1) {
    throw ConfigError("gru_forward expects a non-empty [T×1] sequence, got " + shape_string(seq.shape()));
  }
  ad::Var h = h0;
  for (std::size_t t = 0; t < seq.rows(); ++t) h = gru_cell(h, ad::element(sequence, t, 0), params);
  return h;
}

ad::Var gru_forward(ad::Var sequence, const GruVars& params) {
  const std::size_t hidden = params.w_z.value().rows();
  return gru_forward(sequence, params, sequence.tape()->constant(Tensor({1, hidden})));
}

GruVars bind_constant(ad::Tape& tape, const GruParams& params) {
  GruVars vars;
  map_slots(vars, params, [&](const Tensor& t) { return tape.constant_ref(t); });
  return vars;
}

Tensor gru_cell(const Tensor& h_prev, Real s_t, const GruParams& params) {
  ad::Tape tape;
  const GruVars vars = bind_constant(tape, params);
  return gru_cell(tape.constant_ref(h_prev), tape.constant(Tensor({1, 1}, s_t)), vars).value();
}

Tensor gru_forward(const Tensor& sequence, const GruParams& params, const Tensor& h0) {
  ad::Tape tape;
  const GruVars vars = bind_constant(tape, params);
  return gru_forward(tape.constant(sequence.reshaped({sequence.size(), 1})), vars, tape.constant_ref(h0)).value();
}

}  // namespace cmta
