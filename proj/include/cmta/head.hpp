#pragma once

#include <string>

#include "cmta/autodiff.hpp"
#include "cmta/clip.hpp"
#include "cmta/params.hpp"

namespace cmta {

enum class Variant { kFull, kVOnly, kTOnly, kVtCgtm, kVtFgtm };

// CLI spelling: full, v-only, t-only, vt-cgtm, vt-fgtm.
std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

// Fully connected two-class head over the fused representation.
template <class T>
struct HeadParamsT {
  T w, b;  // [2×D_f], [2]

  template <class Self, class F>
  static void visit(Self& self, F&& f) {
    f("w", self.w, ParamKind::kWeight);
    f("b", self.b, ParamKind::kBias);
  }
};

using HeadParams = HeadParamsT<Tensor>;
using HeadVars = HeadParamsT<ad::Var>;

HeadParams make_head_params(std::size_t fusion_width);
HeadVars bind_constant(ad::Tape& tape, const HeadParams& params);

inline constexpr Real kProbEps = Real(1e-7);

// [h_T; h_fine], coarse first. Only meaningful for the full model.
ad::Var fuse(ad::Var h_coarse, ad::Var h_fine, Variant variant);

// softmax(W·h + b) → [1×2] = (p_real, p_fake).
ad::Var classify(ad::Var h_fusion, const HeadVars& head);

// −[y·log p + (1−y)·log(1−p)] with p clamped to [ε, 1−ε].
Real bce_loss(Real p_fake, Label y);
// Tape form over the [1×2] probability pair; uses p_fake = column 1.
ad::Var bce_loss(ad::Var probs, Label y);

}  // namespace cmta
