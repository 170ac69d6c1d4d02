#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cmta {

// The library is compiled twice: 32-bit reals for training and 64-bit reals
// (CMTA_REAL_DOUBLE) for oracle and gradient checks.
#ifdef CMTA_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major tensor with value semantics. Rank-1 tensors are treated as
// a single row by the matrix helpers.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor from_rows(std::initializer_list<std::initializer_list<Real>> rows);
  static Tensor vector(std::initializer_list<Real> values);
  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t rows() const;
  std::size_t cols() const;

  Real& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  Real operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  Real& operator[](std::size_t i) { return values_[i]; }
  Real operator[](std::size_t i) const { return values_[i]; }

  std::span<Real> values() { return values_; }
  std::span<const Real> values() const { return values_; }
  Real* data() { return values_.data(); }
  const Real* data() const { return values_.data(); }

  std::span<const Real> row(std::size_t r) const { return values().subspan(r * cols(), cols()); }
  std::span<Real> row(std::size_t r) { return values().subspan(r * cols(), cols()); }

  Tensor reshaped(Shape shape) const;
  bool all_finite() const;
  void fill(Real v);
  void add_inplace(const Tensor& other);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<Real> values_;
};

std::size_t shape_product(const Shape& shape);

}  // namespace cmta
