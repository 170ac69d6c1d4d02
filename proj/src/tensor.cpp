#include "cmta/tensor.hpp"

#include <cmath>
#include <sstream>

#include "cmta/errors.hpp"

namespace cmta {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_product(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {
void check_extents(const Shape& shape) {
  if (shape.empty()) throw ConfigError("tensor shape must have at least one extent");
  for (auto e : shape) {
    if (e == 0) throw ConfigError("tensor extents must be positive, got " + shape_string(shape));
  }
}
}  // namespace

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  values_.assign(shape_product(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> values) : shape_(std::move(shape)), values_(std::move(values)) {
  check_extents(shape_);
  if (shape_product(shape_) != values_.size()) {
    throw ConfigError("tensor " + shape_string(shape_) + " given " + std::to_string(values_.size()) + " values");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
  std::vector<Real> v;
  std::size_t cols = rows.size() ? rows.begin()->size() : 0;
  for (const auto& r : rows) {
    if (r.size() != cols) throw ConfigError("ragged rows in Tensor::from_rows");
    v.insert(v.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(v));
}

Tensor Tensor::vector(std::initializer_list<Real> values) {
  return Tensor({values.size()}, std::vector<Real>(values));
}

std::size_t Tensor::rows() const {
  if (rank() == 1) return 1;
  if (rank() == 2) return shape_[0];
  throw ConfigError("matrix view requested on rank-" + std::to_string(rank()) + " tensor");
}

std::size_t Tensor::cols() const {
  if (rank() == 1) return shape_[0];
  if (rank() == 2) return shape_[1];
  throw ConfigError("matrix view requested on rank-" + std::to_string(rank()) + " tensor");
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_product(shape) != size()) {
    throw ConfigError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

bool Tensor::all_finite() const {
  for (Real v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(Real v) {
  for (auto& x : values_) x = v;
}

void Tensor::add_inplace(const Tensor& other) {
  if (other.size() != size()) {
    throw ConfigError("add_inplace: " + shape_string(shape_) + " vs " + shape_string(other.shape()));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
}

const char* to_string(LoadErrorKind kind) {
  switch (kind) {
    case LoadErrorKind::kBadMagic: return "bad magic";
    case LoadErrorKind::kVersionMismatch: return "version mismatch";
    case LoadErrorKind::kTruncated: return "truncated payload";
    case LoadErrorKind::kNonFinite: return "non-finite values";
    case LoadErrorKind::kMalformed: return "malformed";
    case LoadErrorKind::kMissingFile: return "missing file";
    case LoadErrorKind::kEmpty: return "empty";
  }
  return "unknown";
}

LoadError::LoadError(LoadErrorKind kind, const std::string& path, const std::string& detail)
    : std::runtime_error(path + ": " + to_string(kind) + (detail.empty() ? "" : " (" + detail + ")")),
      kind_(kind),
      path_(path) {}

}  // namespace cmta
