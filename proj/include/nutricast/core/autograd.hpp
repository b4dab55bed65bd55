#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <unordered_map>
#include <vector>

#include "nutricast/core/error.hpp"
#include "nutricast/core/parameter.hpp"
#include "nutricast/core/tensor.hpp"

namespace nutricast {

/// Which nodes get gradients on the reverse sweep.
///   Parameters: only nodes downstream of a trainable parameter or a watched input.
///   All:        every node, used by interpretability to read activation gradients.
enum class GradMode { Parameters, All };

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = std::numeric_limits<std::size_t>::max();
  bool valid() const noexcept { return id != std::numeric_limits<std::size_t>::max(); }
};

/// Reverse-mode tape. Values are rank-2 (rank-1 counts as a single row).
/// A tape is single-use: build a graph, call backward() once, read gradients.
template <typename T>
class Tape {
 public:
  explicit Tape(GradMode mode = GradMode::Parameters) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  GradMode mode() const noexcept { return mode_; }

  Var constant(Tensor<T> value) { return push(std::move(value), mode_ == GradMode::All); }

  /// An input whose gradient should be available after backward().
  Var watch(Tensor<T> value) { return push(std::move(value), true); }

  /// Leaf bound to a parameter. Trainable parameters get their gradient
  /// accumulated into Parameter::grad by backward().
  Var parameter(Parameter<T>& p) { return bind(&p, p.trainable); }

  /// Read-only binding; never writes back into the parameter.
  Var parameter(const Parameter<T>& p) { return bind(&p, false); }

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }

  /// Gradient of the last backward() target with respect to `v`; zeros if
  /// nothing flowed into it.
  Tensor<T> grad(Var v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return Tensor<T>(n.value.shape(), T{0});
    return n.grad;
  }

  bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  void backward(Var loss) {
    Node& root = nodes_.at(loss.id);
    if (root.value.size() != 1) {
      throw ContractError("backward() needs a scalar loss, got shape " + shape_string(root.value.shape()));
    }
    if (!root.needs_grad) return;
    root.grad = Tensor<T>(root.value.shape(), T{1});
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty() || !n.backward) continue;
      n.backward();
    }
    for (Node& n : nodes_) {
      if (!n.accumulate || n.grad.empty()) continue;
      auto* p = const_cast<Parameter<T>*>(n.param);
      if (!p->has_grad()) p->grad = Tensor<T>(p->value.shape(), T{0});
      for (std::size_t k = 0; k < n.grad.size(); ++k) p->grad[k] += n.grad[k];
    }
  }

  // --- op authoring interface ---------------------------------------------

  /// Record a result node. `backward` runs only when the node has a gradient.
  template <typename Fn>
  Var emit(Tensor<T> value, std::initializer_list<Var> inputs, Fn&& backward) {
    return emit_n(std::move(value), std::vector<Var>(inputs), std::forward<Fn>(backward));
  }

  template <typename Fn>
  Var emit_n(Tensor<T> value, const std::vector<Var>& inputs, Fn&& backward) {
    bool needs = mode_ == GradMode::All;
    for (Var in : inputs) needs = needs || nodes_.at(in.id).needs_grad;
    Var out = push(std::move(value), needs);
    if (needs) nodes_[out.id].backward = std::forward<Fn>(backward);
    return out;
  }

  /// Mutable gradient buffer of `v` or nullptr when `v` takes no gradient.
  Tensor<T>* grad_sink(Var v) {
    Node& n = nodes_[v.id];
    if (!n.needs_grad) return nullptr;
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape(), T{0});
    return &n.grad;
  }

  const Tensor<T>& grad_of(Var v) const { return nodes_[v.id].grad; }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    bool accumulate = false;
    const Parameter<T>* param = nullptr;
    std::function<void()> backward;
  };

  Var push(Tensor<T> value, bool needs_grad) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  Var bind(const Parameter<T>* p, bool accumulate) {
    if (auto it = leaves_.find(p); it != leaves_.end()) return Var{it->second};
    Var v = push(p->value, accumulate || mode_ == GradMode::All);
    nodes_[v.id].param = p;
    nodes_[v.id].accumulate = accumulate;
    leaves_.emplace(p, v.id);
    return v;
  }

  GradMode mode_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> leaves_;
};

namespace kernels {

// C[n x m] += A[n x k] * B[k x m]
template <typename T>
void gemm_nn(std::size_t n, std::size_t k, std::size_t m, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < n; ++i) {
    T* ci = c + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* bp = b + p * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[n x m] += A[n x k] * B[m x k]^T
template <typename T>
void gemm_nt(std::size_t n, std::size_t k, std::size_t m, const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < n; ++i) {
    const T* ai = a + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const T* bj = b + j * k;
      T s{0};
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      c[i * m + j] += s;
    }
  }
}

// C[n x m] += A[k x n]^T * B[k x m]
template <typename T>
void gemm_tn(std::size_t n, std::size_t k, std::size_t m, const T* a, const T* b, T* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const T* bp = b + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const T av = a[p * n + i];
      T* ci = c + i * m;
      for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
    }
  }
}

}  // namespace kernels

/// Differentiable operations over Tape nodes.
namespace ad {

namespace detail {
template <typename T>
std::size_t rows(const Tensor<T>& t) { return t.rows(); }
template <typename T>
std::size_t cols(const Tensor<T>& t) { return t.cols(); }

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

template <typename T>
Shape matrix_shape(std::size_t r, std::size_t c) { return Shape{r, c}; }
}  // namespace detail

template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  const auto& A = tape.value(a);
  const auto& B = tape.value(b);
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  if (B.rows() != k) {
    throw DimensionError("matmul: " + shape_string(A.shape()) + " x " + shape_string(B.shape()));
  }
  Tensor<T> C = Tensor<T>::matrix(n, m);
  kernels::gemm_nn(n, k, m, A.data(), B.data(), C.data());
  return tape.emit(std::move(C), {a, b}, [&tape, a, b, out = Var{tape.node_count()}, n, k, m] {
    const auto& dC = tape.grad_of(out);
    if (auto* dA = tape.grad_sink(a)) kernels::gemm_nt(n, m, k, dC.data(), tape.value(b).data(), dA->data());
    if (auto* dB = tape.grad_sink(b)) kernels::gemm_tn(k, n, m, tape.value(a).data(), dC.data(), dB->data());
  });
}

/// a * b^T
template <typename T>
Var matmul_nt(Tape<T>& tape, Var a, Var b) {
  const auto& A = tape.value(a);
  const auto& B = tape.value(b);
  const std::size_t n = A.rows(), k = A.cols(), m = B.rows();
  if (B.cols() != k) {
    throw DimensionError("matmul_nt: " + shape_string(A.shape()) + " x " + shape_string(B.shape()) + "^T");
  }
  Tensor<T> C = Tensor<T>::matrix(n, m);
  kernels::gemm_nt(n, k, m, A.data(), B.data(), C.data());
  return tape.emit(std::move(C), {a, b}, [&tape, a, b, out = Var{tape.node_count()}, n, k, m] {
    const auto& dC = tape.grad_of(out);
    // dA = dC * B, dB = dC^T * A
    if (auto* dA = tape.grad_sink(a)) kernels::gemm_nn(n, m, k, dC.data(), tape.value(b).data(), dA->data());
    if (auto* dB = tape.grad_sink(b)) kernels::gemm_tn(m, n, k, dC.data(), tape.value(a).data(), dB->data());
  });
}

template <typename T>
Var transpose(Tape<T>& tape, Var a) {
  const auto& A = tape.value(a);
  const std::size_t n = A.rows(), m = A.cols();
  Tensor<T> out = Tensor<T>::matrix(m, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(j, i) = A(i, j);
  return tape.emit(std::move(out), {a}, [&tape, a, o = Var{tape.node_count()}, n, m] {
    const auto& d = tape.grad_of(o);
    if (auto* dA = tape.grad_sink(a))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*dA)(i, j) += d(j, i);
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  const auto& A = tape.value(a);
  const auto& B = tape.value(b);
  detail::require_same_shape(A, B, "add");
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return tape.emit(std::move(out), {a, b}, [&tape, a, b, o = Var{tape.node_count()}] {
    const auto& d = tape.grad_of(o);
    for (Var v : {a, b})
      if (auto* g = tape.grad_sink(v))
        for (std::size_t i = 0; i < d.size(); ++i) (*g)[i] += d[i];
  });
}

/// Adds a length-m row vector to every row of an n x m matrix.
template <typename T>
Var add_row(Tape<T>& tape, Var a, Var row) {
  const auto& A = tape.value(a);
  const auto& R = tape.value(row);
  const std::size_t n = A.rows(), m = A.cols();
  if (R.size() != m) throw DimensionError("add_row: row of " + std::to_string(R.size()) + " vs width " + std::to_string(m));
  Tensor<T> out = A;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) += R[j];
  return tape.emit(std::move(out), {a, row}, [&tape, a, row, o = Var{tape.node_count()}, n, m] {
    const auto& d = tape.grad_of(o);
    if (auto* g = tape.grad_sink(a))
      for (std::size_t i = 0; i < d.size(); ++i) (*g)[i] += d[i];
    if (auto* g = tape.grad_sink(row))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) (*g)[j] += d(i, j);
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var a, double s) {
  Tensor<T> out = tape.value(a);
  for (auto& v : out.values()) v = static_cast<T>(v * s);
  return tape.emit(std::move(out), {a}, [&tape, a, o = Var{tape.node_count()}, s] {
    const auto& d = tape.grad_of(o);
    if (auto* g = tape.grad_sink(a))
      for (std::size_t i = 0; i < d.size(); ++i) (*g)[i] += static_cast<T>(d[i] * s);
  });
}

/// Multiplies every entry of `a` by the scalar node `s`.
template <typename T>
Var mul_scalar(Tape<T>& tape, Var a, Var s) {
  if (tape.value(s).size() != 1) throw DimensionError("mul_scalar: scale must be a scalar");
  const T sv = tape.value(s)[0];
  Tensor<T> out = tape.value(a);
  for (auto& v : out.values()) v *= sv;
  return tape.emit(std::move(out), {a, s}, [&tape, a, s, o = Var{tape.node_count()}] {
    const auto& d = tape.grad_of(o);
    const T sv = tape.value(s)[0];
    if (auto* g = tape.grad_sink(a))
      for (std::size_t i = 0; i < d.size(); ++i) (*g)[i] += d[i] * sv;
    if (auto* g = tape.grad_sink(s)) {
      const auto& A = tape.value(a);
      T acc{0};
      for (std::size_t i = 0; i < d.size(); ++i) acc += d[i] * A[i];
      (*g)[0] += acc;
    }
  });
}

inline double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }
inline double gelu_slope(double x) {
  return 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)) +
         x * std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Exact (erf) GELU.
template <typename T>
Var gelu(Tape<T>& tape, Var a) {
  Tensor<T> out = tape.value(a);
  for (auto& v : out.values()) v = static_cast<T>(gelu_value(v));
  return tape.emit(std::move(out), {a}, [&tape, a, o = Var{tape.node_count()}] {
    const auto& d = tape.grad_of(o);
    const auto& x = tape.value(a);
    if (auto* g = tape.grad_sink(a))
      for (std::size_t i = 0; i < d.size(); ++i) (*g)[i] += static_cast<T>(d[i] * gelu_slope(x[i]));
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var a) {
  Tensor<T> out = tape.value(a);
  for (auto& v : out.values()) v = v > T{0} ? v : T{0};
  return tape.emit(std::move(out), {a}, [&tape, a, o = Var{tape.node_count()}] {
    const auto& d = tape.grad_of(o);
    const auto& x = tape.value(a);
    if (auto* g = tape.grad_sink(a))
      for (std::size_t i = 0; i < d.size(); ++i)
        if (x[i] > T{0}) (*g)[i] += d[i];
  });
}

/// Row-wise layer normalization with affine gamma/beta over the last axis.
template <typename T>
Var layer_norm(Tape<T>& tape, Var x, Var gamma, Var beta, double eps) {
  const auto& X = tape.value(x);
  const std::size_t n = X.rows(), m = X.cols();
  if (tape.value(gamma).size() != m || tape.value(beta).size() != m) {
    throw DimensionError("layer_norm: gamma/beta length must equal " + std::to_string(m));
  }
  if (!(eps > 0)) throw DomainError("layer_norm: eps must be positive");
  Tensor<T> xhat = Tensor<T>::matrix(n, m);
  std::vector<T> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    T mean{0};
    for (std::size_t j = 0; j < m; ++j) mean += X(i, j);
    mean /= static_cast<T>(m);
    T var{0};
    for (std::size_t j = 0; j < m; ++j) var += (X(i, j) - mean) * (X(i, j) - mean);
    var /= static_cast<T>(m);
    inv_std[i] = T{1} / std::sqrt(var + static_cast<T>(eps));
    for (std::size_t j = 0; j < m; ++j) xhat(i, j) = (X(i, j) - mean) * inv_std[i];
  }
  const auto& G = tape.value(gamma);
  const auto& B = tape.value(beta);
  Tensor<T> out = Tensor<T>::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = G[j] * xhat(i, j) + B[j];
  return tape.emit(std::move(out), {x, gamma, beta},
                   [&tape, x, gamma, beta, o = Var{tape.node_count()}, xhat = std::move(xhat),
                    inv_std = std::move(inv_std), n, m] {
                     const auto& d = tape.grad_of(o);
                     const auto& G = tape.value(gamma);
                     if (auto* dg = tape.grad_sink(gamma))
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < m; ++j) (*dg)[j] += d(i, j) * xhat(i, j);
                     if (auto* db = tape.grad_sink(beta))
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < m; ++j) (*db)[j] += d(i, j);
                     if (auto* dx = tape.grad_sink(x)) {
                       for (std::size_t i = 0; i < n; ++i) {
                         T mean_d{0}, mean_dx{0};
                         for (std::size_t j = 0; j < m; ++j) {
                           const T dxh = d(i, j) * G[j];
                           mean_d += dxh;
                           mean_dx += dxh * xhat(i, j);
                         }
                         mean_d /= static_cast<T>(m);
                         mean_dx /= static_cast<T>(m);
                         for (std::size_t j = 0; j < m; ++j) {
                           const T dxh = d(i, j) * G[j];
                           (*dx)(i, j) += inv_std[i] * (dxh - mean_d - xhat(i, j) * mean_dx);
                         }
                       }
                     }
                   });
}

/// Row softmax of `scale * x`. Columns with `key_mask[j] == false` get
/// probability exactly zero.
template <typename T>
Var softmax_rows(Tape<T>& tape, Var x, double scale = 1.0, const std::vector<bool>* key_mask = nullptr) {
  const auto& X = tape.value(x);
  const std::size_t n = X.rows(), m = X.cols();
  if (key_mask && key_mask->size() != m) throw DimensionError("softmax_rows: mask length mismatch");
  Tensor<T> Y = Tensor<T>::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < m; ++j)
      if (!key_mask || (*key_mask)[j]) mx = std::max(mx, static_cast<T>(scale * X(i, j)));
    if (!std::isfinite(mx)) throw DomainError("softmax_rows: every column masked");
    T sum{0};
    for (std::size_t j = 0; j < m; ++j) {
      if (key_mask && !(*key_mask)[j]) continue;
      Y(i, j) = std::exp(static_cast<T>(scale * X(i, j)) - mx);
      sum += Y(i, j);
    }
    for (std::size_t j = 0; j < m; ++j) Y(i, j) /= sum;
  }
  return tape.emit(Y, {x}, [&tape, x, o = Var{tape.node_count()}, scale, n, m] {
    const auto& d = tape.grad_of(o);
    const auto& Y = tape.value(o);
    if (auto* g = tape.grad_sink(x)) {
      for (std::size_t i = 0; i < n; ++i) {
        T dot{0};
        for (std::size_t j = 0; j < m; ++j) dot += Y(i, j) * d(i, j);
        for (std::size_t j = 0; j < m; ++j) (*g)(i, j) += static_cast<T>(scale * Y(i, j) * (d(i, j) - dot));
      }
    }
  });
}

template <typename T>
Var slice_cols(Tape<T>& tape, Var x, std::size_t c0, std::size_t width) {
  const auto& X = tape.value(x);
  const std::size_t n = X.rows(), m = X.cols();
  if (c0 + width > m || width == 0) throw DimensionError("slice_cols out of range");
  Tensor<T> out = Tensor<T>::matrix(n, width);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < width; ++j) out(i, j) = X(i, c0 + j);
  return tape.emit(std::move(out), {x}, [&tape, x, o = Var{tape.node_count()}, c0, width, n] {
    const auto& d = tape.grad_of(o);
    if (auto* g = tape.grad_sink(x))
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < width; ++j) (*g)(i, c0 + j) += d(i, j);
  });
}

template <typename T>
Var slice_rows(Tape<T>& tape, Var x, std::size_t r0, std::size_t count) {
  const auto& X = tape.value(x);
  const std::size_t m = X.cols();
  if (r0 + count > X.rows() || count == 0) throw DimensionError("slice_rows out of range");
  Tensor<T> out = Tensor<T>::matrix(count, m);
  std::copy_n(X.data() + r0 * m, count * m, out.data());
  return tape.emit(std::move(out), {x}, [&tape, x, o = Var{tape.node_count()}, r0, count, m] {
    const auto& d = tape.grad_of(o);
    if (auto* g = tape.grad_sink(x))
      for (std::size_t k = 0; k < count * m; ++k) (*g)[r0 * m + k] += d[k];
  });
}

template <typename T>
Var concat_cols(Tape<T>& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t n = tape.value(parts[0]).rows();
  std::size_t m = 0;
  for (Var p : parts) {
    if (tape.value(p).rows() != n) throw DimensionError("concat_cols: row count mismatch");
    m += tape.value(p).cols();
  }
  Tensor<T> out = Tensor<T>::matrix(n, m);
  std::size_t c0 = 0;
  for (Var p : parts) {
    const auto& P = tape.value(p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j) out(i, c0 + j) = P(i, j);
    c0 += P.cols();
  }
  return tape.emit_n(std::move(out), parts, [&tape, parts, o = Var{tape.node_count()}, n] {
    const auto& d = tape.grad_of(o);
    std::size_t c0 = 0;
    for (Var p : parts) {
      const std::size_t w = tape.value(p).cols();
      if (auto* g = tape.grad_sink(p))
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) (*g)(i, j) += d(i, c0 + j);
      c0 += w;
    }
  });
}

template <typename T>
Var concat_rows(Tape<T>& tape, const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t m = tape.value(parts[0]).cols();
  std::size_t n = 0;
  for (Var p : parts) {
    if (tape.value(p).cols() != m) throw DimensionError("concat_rows: column count mismatch");
    n += tape.value(p).rows();
  }
  Tensor<T> out = Tensor<T>::matrix(n, m);
  std::size_t off = 0;
  for (Var p : parts) {
    const auto& P = tape.value(p);
    std::copy_n(P.data(), P.size(), out.data() + off);
    off += P.size();
  }
  return tape.emit_n(std::move(out), parts, [&tape, parts, o = Var{tape.node_count()}] {
    const auto& d = tape.grad_of(o);
    std::size_t off = 0;
    for (Var p : parts) {
      const std::size_t sz = tape.value(p).size();
      if (auto* g = tape.grad_sink(p))
        for (std::size_t k = 0; k < sz; ++k) (*g)[k] += d[off + k];
      off += sz;
    }
  });
}

/// Embedding lookup: row `ids[i]` of `table` becomes output row i.
template <typename T>
Var gather_rows(Tape<T>& tape, Var table, const std::vector<std::size_t>& ids) {
  const auto& W = tape.value(table);
  const std::size_t m = W.cols();
  if (ids.empty()) throw DimensionError("gather_rows: no ids");
  Tensor<T> out = Tensor<T>::matrix(ids.size(), m);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= W.rows()) {
      throw DomainError("gather_rows: id " + std::to_string(ids[i]) + " >= table size " + std::to_string(W.rows()));
    }
    std::copy_n(W.data() + ids[i] * m, m, out.data() + i * m);
  }
  return tape.emit(std::move(out), {table}, [&tape, table, o = Var{tape.node_count()}, ids, m] {
    const auto& d = tape.grad_of(o);
    if (auto* g = tape.grad_sink(table))
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t j = 0; j < m; ++j) (*g)(ids[i], j) += d(i, j);
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var a) {
  const auto& A = tape.value(a);
  T s{0};
  for (T v : A.values()) s += v;
  return tape.emit(Tensor<T>({1}, s), {a}, [&tape, a, o = Var{tape.node_count()}] {
    const T d = tape.grad_of(o)[0];
    if (auto* g = tape.grad_sink(a))
      for (auto& v : g->values()) v += d;
  });
}

/// Single entry (r, c) of `a` as a scalar node.
template <typename T>
Var pick(Tape<T>& tape, Var a, std::size_t r, std::size_t c) {
  const auto& A = tape.value(a);
  if (r >= A.rows() || c >= A.cols()) throw DimensionError("pick out of range");
  return tape.emit(Tensor<T>({1}, A(r, c)), {a}, [&tape, a, o = Var{tape.node_count()}, r, c] {
    if (auto* g = tape.grad_sink(a)) (*g)(r, c) += tape.grad_of(o)[0];
  });
}

/// Sum of scalar nodes, each multiplied by `weight`.
template <typename T>
Var weighted_sum(Tape<T>& tape, const std::vector<Var>& scalars, double weight = 1.0) {
  if (scalars.empty()) throw DimensionError("weighted_sum: no inputs");
  T s{0};
  for (Var v : scalars) {
    if (tape.value(v).size() != 1) throw DimensionError("weighted_sum: inputs must be scalars");
    s += tape.value(v)[0];
  }
  s = static_cast<T>(s * weight);
  return tape.emit_n(Tensor<T>({1}, s), scalars, [&tape, scalars, o = Var{tape.node_count()}, weight] {
    const T d = static_cast<T>(tape.grad_of(o)[0] * weight);
    for (Var v : scalars)
      if (auto* g = tape.grad_sink(v)) (*g)[0] += d;
  });
}

/// Mean over rows of -log softmax(logits)[row, target[row]].
template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, const std::vector<std::size_t>& targets) {
  const auto& L = tape.value(logits);
  const std::size_t n = L.rows(), m = L.cols();
  if (targets.size() != n) throw DimensionError("softmax_cross_entropy: target count mismatch");
  Tensor<T> probs = Tensor<T>::matrix(n, m);
  T loss{0};
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= m) throw DomainError("softmax_cross_entropy: class " + std::to_string(targets[i]) + " out of range");
    T mx = L(i, 0);
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, L(i, j));
    T s{0};
    for (std::size_t j = 0; j < m; ++j) s += std::exp(L(i, j) - mx);
    const T lse = mx + std::log(s);
    loss += lse - L(i, targets[i]);
    for (std::size_t j = 0; j < m; ++j) probs(i, j) = std::exp(L(i, j) - lse);
  }
  loss /= static_cast<T>(n);
  return tape.emit(Tensor<T>({1}, loss), {logits},
                   [&tape, logits, o = Var{tape.node_count()}, probs = std::move(probs), targets, n, m] {
                     const T d = tape.grad_of(o)[0] / static_cast<T>(n);
                     if (auto* g = tape.grad_sink(logits))
                       for (std::size_t i = 0; i < n; ++i)
                         for (std::size_t j = 0; j < m; ++j)
                           (*g)(i, j) += d * (probs(i, j) - (j == targets[i] ? T{1} : T{0}));
                   });
}

/// L2-normalizes every row. Zero rows are a domain error.
template <typename T>
Var normalize_rows(Tape<T>& tape, Var x) {
  const auto& X = tape.value(x);
  const std::size_t n = X.rows(), m = X.cols();
  Tensor<T> Y = Tensor<T>::matrix(n, m);
  std::vector<T> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    T s{0};
    for (std::size_t j = 0; j < m; ++j) s += X(i, j) * X(i, j);
    norms[i] = std::sqrt(s);
    if (!(norms[i] > T{0})) throw DomainError("normalize_rows: zero-norm vector");
    for (std::size_t j = 0; j < m; ++j) Y(i, j) = X(i, j) / norms[i];
  }
  return tape.emit(Y, {x}, [&tape, x, o = Var{tape.node_count()}, norms = std::move(norms), n, m] {
    const auto& d = tape.grad_of(o);
    const auto& Y = tape.value(o);
    if (auto* g = tape.grad_sink(x)) {
      for (std::size_t i = 0; i < n; ++i) {
        T dot{0};
        for (std::size_t j = 0; j < m; ++j) dot += Y(i, j) * d(i, j);
        for (std::size_t j = 0; j < m; ++j) (*g)(i, j) += (d(i, j) - Y(i, j) * dot) / norms[i];
      }
    }
  });
}

/// 1 / clamp(exp(log_tau), lo, hi). Gradient is zero while clamped.
template <typename T>
Var inverse_temperature(Tape<T>& tape, Var log_tau, double lo, double hi) {
  if (tape.value(log_tau).size() != 1) throw DimensionError("inverse_temperature: expects a scalar");
  const double raw = std::exp(static_cast<double>(tape.value(log_tau)[0]));
  const double tau = std::clamp(raw, lo, hi);
  const bool clamped = raw < lo || raw > hi;
  return tape.emit(Tensor<T>({1}, static_cast<T>(1.0 / tau)), {log_tau},
                   [&tape, log_tau, o = Var{tape.node_count()}, tau, clamped] {
                     if (clamped) return;
                     if (auto* g = tape.grad_sink(log_tau))
                       (*g)[0] += static_cast<T>(tape.grad_of(o)[0] * (-1.0 / tau));
                   });
}

}  // namespace ad
}  // namespace nutricast
