#include "cmta/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cmta/errors.hpp"

namespace cmta::ad {

const Tensor& Var::value() const { return tape_->value(index_); }
bool Var::requires_grad() const { return tape_->requires_grad(index_); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, true, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::constant_ref(const Tensor& value) {
  nodes_.push_back(Node{{}, &value, {}, false, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::leaf_ref(const Tensor& value) {
  nodes_.push_back(Node{{}, &value, {}, true, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::span<const Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape() != this) throw ConfigError("operation mixes variables from different tapes");
    needs = needs || nodes_[in.index()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), nullptr, {}, needs, needs ? std::move(backward) : Backward{}});
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t i) const {
  const Node& n = nodes_[i];
  return n.borrowed ? *n.borrowed : n.owned;
}

Tensor& Tape::grad_buffer(std::size_t i) {
  Node& n = nodes_[i];
  if (n.grad.empty()) n.grad = Tensor::zeros_like(value(i));
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.index()];
  if (n.grad.empty()) return Tensor::zeros_like(value(v.index()));
  return n.grad;
}

void Tape::backward(Var out) {
  if (out.tape() != this) throw ConfigError("backward on a variable from another tape");
  if (value(out.index()).size() != 1) {
    throw ConfigError("backward requires a single-element output, got " + shape_string(value(out.index()).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[out.index()].requires_grad) return;
  grad_buffer(out.index())[0] = Real(1);
  for (std::size_t i = out.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward(*this, i);
  }
}

void Tape::clear() { nodes_.clear(); }

void Tape::truncate(std::size_t size) {
  if (size < nodes_.size()) nodes_.resize(size);
}

namespace {

struct Dims {
  std::size_t rows;
  std::size_t cols;
};

Dims dims(const Tensor& t) { return {t.rows(), t.cols()}; }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ConfigError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                    shape_string(b.shape()));
}

Tensor as_matrix(Tensor t) {
  if (t.rank() == 1) return t.reshaped({1, t.size()});
  return t;
}

// Accumulate g (same element count as the target) into an input's gradient.
void accumulate(Tape& tape, Var target, const Tensor& g) {
  if (!target.requires_grad()) return;
  Tensor& buf = tape.grad_buffer(target.index());
  Real* dst = buf.data();
  const Real* src = g.data();
  for (std::size_t i = 0; i < buf.size(); ++i) dst[i] += src[i];
}

template <class Fn>
Var unary(Var x, Fn&& forward_fn, std::function<Real(Real x, Real y)> derivative) {
  const Tensor& xv = x.value();
  Tensor y = as_matrix(xv);
  for (auto& v : y.values()) v = forward_fn(v);
  return x.tape()->record(std::move(y), {x}, [x, derivative = std::move(derivative)](Tape& tape, std::size_t self) {
    if (!x.requires_grad()) return;
    const Tensor& g = tape.grad_buffer(self);
    const Tensor& yv = tape.value(self);
    const Tensor& xv = x.value();
    Tensor& dx = tape.grad_buffer(x.index());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * derivative(xv[i], yv[i]);
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto [m, k] = dims(a);
  auto [k2, n] = dims(b);
  if (k != k2) shape_error("matmul", a, b);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    Real* ci = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = a.data()[i * k + p];
      const Real* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

Real sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

Var matmul(Var a, Var b) {
  Tensor c = matmul(a.value(), b.value());
  const std::size_t m = c.rows(), n = c.cols(), k = a.value().cols();
  return a.tape()->record(std::move(c), {a, b}, [a, b, m, n, k](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_buffer(self);
    if (a.requires_grad()) {
      const Tensor& bv = b.value();
      Tensor& da = tape.grad_buffer(a.index());
      for (std::size_t i = 0; i < m; ++i) {
        const Real* gi = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const Real* bp = bv.data() + p * n;
          Real acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bp[j];
          da.data()[i * k + p] += acc;
        }
      }
    }
    if (b.requires_grad()) {
      const Tensor& av = a.value();
      Tensor& db = tape.grad_buffer(b.index());
      for (std::size_t i = 0; i < m; ++i) {
        const Real* gi = g.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const Real aip = av.data()[i * k + p];
          Real* dbp = db.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) dbp[j] += aip * gi[j];
        }
      }
    }
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  auto [m, k] = dims(av);
  auto [n, k2] = dims(bv);
  if (k != k2) shape_error("matmul_nt", av, bv);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const Real* ai = av.data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const Real* bj = bv.data() + j * k;
      Real acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c.data()[i * n + j] = acc;
    }
  }
  return a.tape()->record(std::move(c), {a, b}, [a, b, m, n, k](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_buffer(self);
    if (a.requires_grad()) {
      const Tensor& bv = b.value();
      Tensor& da = tape.grad_buffer(a.index());
      for (std::size_t i = 0; i < m; ++i) {
        Real* dai = da.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const Real gij = g.data()[i * n + j];
          const Real* bj = bv.data() + j * k;
          for (std::size_t p = 0; p < k; ++p) dai[p] += gij * bj[p];
        }
      }
    }
    if (b.requires_grad()) {
      const Tensor& av = a.value();
      Tensor& db = tape.grad_buffer(b.index());
      for (std::size_t i = 0; i < m; ++i) {
        const Real* ai = av.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
          const Real gij = g.data()[i * n + j];
          Real* dbj = db.data() + j * k;
          for (std::size_t p = 0; p < k; ++p) dbj[p] += gij * ai[p];
        }
      }
    }
  });
}

Var linear(Var x, Var weight, Var bias) { return add_row_bias(matmul_nt(x, weight), bias); }

namespace {
void require_same(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}
}  // namespace

Var add(Var a, Var b) {
  require_same("add", a.value(), b.value());
  Tensor c = as_matrix(a.value());
  c.add_inplace(b.value());
  return a.tape()->record(std::move(c), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_buffer(self);
    accumulate(tape, a, g);
    accumulate(tape, b, g);
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a.value(), b.value());
  Tensor c = as_matrix(a.value());
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= bv[i];
  return a.tape()->record(std::move(c), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_buffer(self);
    accumulate(tape, a, g);
    if (b.requires_grad()) {
      Tensor& db = tape.grad_buffer(b.index());
      for (std::size_t i = 0; i < g.size(); ++i) db[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a.value(), b.value());
  Tensor c = as_matrix(a.value());
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= bv[i];
  return a.tape()->record(std::move(c), {a, b}, [a, b](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_buffer(self);
    if (a.requires_grad()) {
      const Tensor& bv = b.value();
      Tensor& da = tape.grad_buffer(a.index());
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i];
    }
    if (b.requires_grad()) {
      const Tensor& av = a.value();
      Tensor& db = tape.grad_buffer(b.index());
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * av[i];
    }
  });
}

Var scale(Var x, Real factor) {
  return unary(
      x, [factor](Real v) { return v * factor; }, [factor](Real, Real) { return factor; });
}

Var one_minus(Var x) {
  return unary(
      x, [](Real v) { return Real(1) - v; }, [](Real, Real) { return Real(-1); });
}

Var add_row_bias(Var x, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  if (bv.size() != xv.cols() || (bv.rank() == 2 && bv.rows() != 1)) shape_error("add_row_bias", xv, bv);
  Tensor y = as_matrix(xv);
  const std::size_t m = y.rows(), n = y.cols();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y.data()[i * n + j] += bv[j];
  }
  return x.tape()->record(std::move(y), {x, bias}, [x, bias, m, n](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_buffer(self);
    accumulate(tape, x, g);
    if (bias.requires_grad()) {
      Tensor& db = tape.grad_buffer(bias.index());
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) db[j] += g.data()[i * n + j];
      }
    }
  });
}

Var add_n(std::span<const Var> terms) {
  if (terms.empty()) throw ConfigError("add_n: no terms");
  Tensor acc = as_matrix(terms[0].value());
  for (std::size_t t = 1; t < terms.size(); ++t) {
    require_same("add_n", acc, terms[t].value());
    acc.add_inplace(terms[t].value());
  }
  std::vector<Var> inputs(terms.begin(), terms.end());
  return terms[0].tape()->record(std::move(acc), terms, [inputs](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_buffer(self);
    for (const Var& v : inputs) accumulate(tape, v, g);
  });
}

Var sigmoid(Var x) {
  return unary(
      x, [](Real v) { return sigmoid(v); }, [](Real, Real y) { return y * (Real(1) - y); });
}

Var tanh(Var x) {
  return unary(
      x, [](Real v) { return std::tanh(v); }, [](Real, Real y) { return Real(1) - y * y; });
}

Var relu(Var x) {
  return unary(
      x, [](Real v) { return v > 0 ? v : Real(0); }, [](Real v, Real) { return v > 0 ? Real(1) : Real(0); });
}

Var log(Var x) {
  for (Real v : x.value().values()) {
    if (!(v > 0)) throw NonFiniteError("log of non-positive value");
  }
  return unary(
      x, [](Real v) { return std::log(v); }, [](Real v, Real) { return Real(1) / v; });
}

Var clamp(Var x, Real lo, Real hi) {
  return unary(
      x, [lo, hi](Real v) { return std::clamp(v, lo, hi); },
      [lo, hi](Real v, Real) { return (v > lo && v < hi) ? Real(1) : Real(0); });
}

Var softmax(Var x, int axis) {
  if (axis != 0 && axis != 1) throw ConfigError("softmax: axis must be 0 or 1");
  Tensor y = as_matrix(x.value());
  const std::size_t m = y.rows(), n = y.cols();
  // Slices are rows for axis 1 and columns for axis 0.
  const std::size_t slices = axis == 1 ? m : n;
  const std::size_t len = axis == 1 ? n : m;
  const std::size_t stride = axis == 1 ? 1 : n;
  auto base = [=](std::size_t s) { return axis == 1 ? s * n : s; };
  for (std::size_t s = 0; s < slices; ++s) {
    Real* p = y.data() + base(s);
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, p[i * stride]);
    Real total = 0;
    for (std::size_t i = 0; i < len; ++i) {
      p[i * stride] = std::exp(p[i * stride] - mx);
      total += p[i * stride];
    }
    for (std::size_t i = 0; i < len; ++i) p[i * stride] /= total;
  }
  return x.tape()->record(std::move(y), {x}, [x, slices, len, stride, base](Tape& tape, std::size_t self) {
    if (!x.requires_grad()) return;
    const Tensor& g = tape.grad_buffer(self);
    const Tensor& yv = tape.value(self);
    Tensor& dx = tape.grad_buffer(x.index());
    for (std::size_t s = 0; s < slices; ++s) {
      const std::size_t o = base(s);
      Real dot = 0;
      for (std::size_t i = 0; i < len; ++i) dot += g[o + i * stride] * yv[o + i * stride];
      for (std::size_t i = 0; i < len; ++i) {
        const std::size_t k = o + i * stride;
        dx[k] += yv[k] * (g[k] - dot);
      }
    }
  });
}

Var mean(Var x, int axis) {
  if (axis != 0 && axis != 1) throw ConfigError("mean: axis must be 0 or 1");
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  Tensor y = axis == 0 ? Tensor({1, n}) : Tensor({m, 1});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) y[axis == 0 ? j : i] += xv.data()[i * n + j];
  }
  const Real inv = Real(1) / Real(axis == 0 ? m : n);
  for (auto& v : y.values()) v *= inv;
  return x.tape()->record(std::move(y), {x}, [x, axis, m, n, inv](Tape& tape, std::size_t self) {
    if (!x.requires_grad()) return;
    const Tensor& g = tape.grad_buffer(self);
    Tensor& dx = tape.grad_buffer(x.index());
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) dx.data()[i * n + j] += g[axis == 0 ? j : i] * inv;
    }
  });
}

Var sum(Var x) {
  Real total = 0;
  for (Real v : x.value().values()) total += v;
  return x.tape()->record(Tensor({1, 1}, total), {x}, [x](Tape& tape, std::size_t self) {
    if (!x.requires_grad()) return;
    const Real g = tape.grad_buffer(self)[0];
    Tensor& dx = tape.grad_buffer(x.index());
    for (auto& v : dx.values()) v += g;
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ConfigError("concat_cols: no parts");
  const std::size_t m = parts[0].value().rows();
  std::size_t n = 0;
  std::vector<std::size_t> offsets;
  for (const Var& p : parts) {
    if (p.value().rows() != m) shape_error("concat_cols", parts[0].value(), p.value());
    offsets.push_back(n);
    n += p.value().cols();
  }
  Tensor y({m, n});
  for (std::size_t t = 0; t < parts.size(); ++t) {
    const Tensor& pv = parts[t].value();
    const std::size_t w = pv.cols();
    for (std::size_t i = 0; i < m; ++i) std::copy_n(pv.data() + i * w, w, y.data() + i * n + offsets[t]);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(y), parts, [inputs, offsets, m, n](Tape& tape, std::size_t self) {
    const Tensor& g = tape.grad_buffer(self);
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      if (!inputs[t].requires_grad()) continue;
      Tensor& d = tape.grad_buffer(inputs[t].index());
      const std::size_t w = d.size() / m;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < w; ++j) d.data()[i * w + j] += g.data()[i * n + offsets[t] + j];
      }
    }
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (count == 0 || begin + count > n) {
    throw ConfigError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                      ") out of range for " + shape_string(xv.shape()));
  }
  Tensor y({m, count});
  for (std::size_t i = 0; i < m; ++i) std::copy_n(xv.data() + i * n + begin, count, y.data() + i * count);
  return x.tape()->record(std::move(y), {x}, [x, begin, count, m, n](Tape& tape, std::size_t self) {
    if (!x.requires_grad()) return;
    const Tensor& g = tape.grad_buffer(self);
    Tensor& dx = tape.grad_buffer(x.index());
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < count; ++j) dx.data()[i * n + begin + j] += g.data()[i * count + j];
    }
  });
}

Var element(Var x, std::size_t row, std::size_t col) {
  const Tensor& xv = x.value();
  if (row >= xv.rows() || col >= xv.cols()) {
    throw ConfigError("element (" + std::to_string(row) + "," + std::to_string(col) + ") out of range for " +
                      shape_string(xv.shape()));
  }
  const std::size_t k = row * xv.cols() + col;
  return x.tape()->record(Tensor({1, 1}, xv[k]), {x}, [x, k](Tape& tape, std::size_t self) {
    if (!x.requires_grad()) return;
    tape.grad_buffer(x.index())[k] += tape.grad_buffer(self)[0];
  });
}

Var reshape(Var x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  return x.tape()->record(std::move(y), {x}, [x](Tape& tape, std::size_t self) {
    accumulate(tape, x, tape.grad_buffer(self));
  });
}

Var layer_norm(Var x, Var gamma, Var beta, Real eps) {
  const Tensor& xv = x.value();
  const std::size_t m = xv.rows(), n = xv.cols();
  if (gamma.value().size() != n || beta.value().size() != n) shape_error("layer_norm", xv, gamma.value());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor xhat({m, n});
  std::vector<Real> inv_std(m);
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const Real* xi = xv.data() + i * n;
    Real mu = 0;
    for (std::size_t j = 0; j < n; ++j) mu += xi[j];
    mu /= Real(n);
    Real var = 0;
    for (std::size_t j = 0; j < n; ++j) var += (xi[j] - mu) * (xi[j] - mu);
    var /= Real(n);
    inv_std[i] = Real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const Real h = (xi[j] - mu) * inv_std[i];
      xhat.data()[i * n + j] = h;
      y.data()[i * n + j] = h * gv[j] + bv[j];
    }
  }
  return x.tape()->record(
      std::move(y), {x, gamma, beta},
      [x, gamma, beta, m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tape, std::size_t self) {
        const Tensor& g = tape.grad_buffer(self);
        if (gamma.requires_grad()) {
          Tensor& dg = tape.grad_buffer(gamma.index());
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) dg[j] += g.data()[i * n + j] * xhat.data()[i * n + j];
          }
        }
        if (beta.requires_grad()) {
          Tensor& db = tape.grad_buffer(beta.index());
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) db[j] += g.data()[i * n + j];
          }
        }
        if (x.requires_grad()) {
          const Tensor& gv = gamma.value();
          Tensor& dx = tape.grad_buffer(x.index());
          for (std::size_t i = 0; i < m; ++i) {
            Real mean_d = 0, mean_dh = 0;
            for (std::size_t j = 0; j < n; ++j) {
              const Real d = g.data()[i * n + j] * gv[j];
              mean_d += d;
              mean_dh += d * xhat.data()[i * n + j];
            }
            mean_d /= Real(n);
            mean_dh /= Real(n);
            for (std::size_t j = 0; j < n; ++j) {
              const Real d = g.data()[i * n + j] * gv[j];
              dx.data()[i * n + j] += inv_std[i] * (d - mean_d - xhat.data()[i * n + j] * mean_dh);
            }
          }
        }
      });
}

Var dropout(Var x, Real p, std::mt19937_64& rng) {
  if (p < 0 || p >= 1) throw ConfigError("dropout probability must lie in [0, 1)");
  if (p == 0) return x;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(p));
  Tensor mask = Tensor::zeros_like(as_matrix(x.value()));
  const Real kept = Real(1) / (Real(1) - p);
  for (auto& v : mask.values()) v = keep(rng) ? kept : Real(0);
  Tensor y = as_matrix(x.value());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return x.tape()->record(std::move(y), {x}, [x, mask = std::move(mask)](Tape& tape, std::size_t self) {
    if (!x.requires_grad()) return;
    const Tensor& g = tape.grad_buffer(self);
    Tensor& dx = tape.grad_buffer(x.index());
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * mask[i];
  });
}

}  // namespace cmta::ad
