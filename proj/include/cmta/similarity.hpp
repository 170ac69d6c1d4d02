#pragma once

#include <span>

#include "cmta/autodiff.hpp"
#include "cmta/clip.hpp"

namespace cmta {

inline constexpr Real kCosineEps = Real(1e-8);

// v·e / (max(‖v‖, ε)·max(‖e‖, ε)); a zero vector yields 0.
Real cosine(std::span<const Real> v, std::span<const Real> e);
Real cosine(const Tensor& v, const Tensor& e);

// Row-wise cosine of visual [T×d] and textual [T×d] → [T×1], differentiable
// in both inputs. Throws ConfigError naming both widths when they differ.
ad::Var similarity_sequence(ad::Var visual, ad::Var textual);
Tensor similarity_sequence(const EmbeddingClip& clip);

}  // namespace cmta
