#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include "cmta/tensor.hpp"

namespace cmta {

// Drives initialization: weights are Xavier-uniform, biases zero, gains one.
enum class ParamKind { kWeight, kBias, kGain };

// Parameter groups are templates over the slot type so the same layout
// holds tensors (values, gradients, moments) and tape variables.
// Each group provides
//   template <class Self, class F> static void visit(Self&, F&& f)
// calling f(name, slot, kind) for every slot in a fixed order.

// Pointers to every slot of a group in visit order.
template <class Slot, class Group>
std::vector<Slot*> slots(Group& group) {
  std::vector<Slot*> out;
  std::remove_const_t<Group>::visit(group, [&](const auto&, Slot& s, ParamKind) { out.push_back(&s); });
  return out;
}

// Fills `dst` (already sized like the tensor group `src`) slot by slot with
// make(const Tensor&).
template <class DstGroup, class SrcGroup, class Make>
void map_slots(DstGroup& dst, const SrcGroup& src, Make&& make) {
  auto from = slots<const Tensor>(src);
  std::size_t i = 0;
  std::remove_const_t<DstGroup>::visit(dst, [&](const auto&, auto& slot, ParamKind) { slot = make(*from[i++]); });
}

}  // namespace cmta
