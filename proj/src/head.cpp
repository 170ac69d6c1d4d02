#include "cmta/head.hpp"

#include <algorithm>
#include <cmath>

#include "cmta/errors.hpp"

namespace cmta {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kFull: return "full";
    case Variant::kVOnly: return "v-only";
    case Variant::kTOnly: return "t-only";
    case Variant::kVtCgtm: return "vt-cgtm";
    case Variant::kVtFgtm: return "vt-fgtm";
  }
  return "unknown";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : {Variant::kFull, Variant::kVOnly, Variant::kTOnly, Variant::kVtCgtm, Variant::kVtFgtm}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown variant '" + s + "' (expected full|v-only|t-only|vt-cgtm|vt-fgtm)");
}

HeadParams make_head_params(std::size_t fusion_width) {
  if (fusion_width == 0) throw ConfigError("head input width must be positive");
  return HeadParams{Tensor({2, fusion_width}), Tensor({2})};
}

HeadVars bind_constant(ad::Tape& tape, const HeadParams& params) {
  return HeadVars{tape.constant_ref(params.w), tape.constant_ref(params.b)};
}

ad::Var fuse(ad::Var h_coarse, ad::Var h_fine, Variant variant) {
  if (variant != Variant::kFull) {
    throw ConfigError("fusion of both branches applies only to the full model, not " + to_string(variant));
  }
  return ad::concat_cols({h_coarse, h_fine});
}

ad::Var classify(ad::Var h_fusion, const HeadVars& head) {
  if (h_fusion.value().size() != head.w.value().cols()) {
    throw ConfigError("head expects " + std::to_string(head.w.value().cols()) + " features, got " +
                      std::to_string(h_fusion.value().size()));
  }
  return ad::softmax(ad::linear(h_fusion, head.w, head.b), 1);
}

Real bce_loss(Real p_fake, Label y) {
  const Real p = std::clamp(p_fake, kProbEps, Real(1) - kProbEps);
  return y == Label::kFake ? -std::log(p) : -std::log(Real(1) - p);
}

ad::Var bce_loss(ad::Var probs, Label y) {
  const ad::Var p = ad::clamp(ad::element(probs, 0, 1), kProbEps, Real(1) - kProbEps);
  return ad::scale(ad::log(y == Label::kFake ? p : ad::one_minus(p)), Real(-1));
}

}  // namespace cmta
