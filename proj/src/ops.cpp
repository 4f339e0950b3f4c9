// Copyright 2026 The mmer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mmer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmer/errors.hpp"

namespace mmer::ops {
namespace {

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
using BackwardFn = std::function<void(Node<T>&)>;

// Wraps a computed value into a tensor, recording it on the active tape when
// any parent participates in differentiation.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::vector<NodePtr<T>> parents,
                      BackwardFn<T> fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  auto* tape = Tape<T>::active();
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  if (tape != nullptr && needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(fn);
    tape->record(node);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
void require_2d(const Tensor<T>& x, const char* op) {
  if (x.dim() != 2) {
    throw DimensionError(std::string(op) + " expects a 2-D tensor, got " + shape_str(x.shape()));
  }
}

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// Elementwise unary op with derivative expressed through input and output.
template <typename T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& x, F f, D df) {
  const auto& xv = x.node()->value;
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(x.shape(), std::move(out), {x.node()}, [df](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(p.value[i], self.value[i]);
  });
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner extents differ, " + shape_str(a.shape()) + " . " +
                         shape_str(b.shape()));
  }
  const T* av = a.node()->value.data();
  const T* bv = b.node()->value.data();
  std::vector<T> out(m * n, T(0));
  for (std::size_t i = 0; i < m; ++i) {
    T* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = av[i * k + p];
      if (aip == T(0)) continue;
      const T* brow = bv + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  return make_result<T>({m, n}, std::move(out), {a.node(), b.node()},
                        [m, k, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const T* g = self.grad.data();
    if (pa.requires_grad) {
      // dA = G . B^T
      auto& ga = pa.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const T* brow = pb.value.data() + p * n;
          const T* grow = g + i * n;
          T acc = 0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (pb.requires_grad) {
      // dB = A^T . G
      auto& gb = pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const T* grow = g + i * n;
        for (std::size_t p = 0; p < k; ++p) {
          const T aip = pa.value[i * k + p];
          if (aip == T(0)) continue;
          T* gbrow = gb.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
        }
      }
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() == b.shape()) {
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
    return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
      for (auto& p : self.parents) {
        if (!p->requires_grad) continue;
        auto& g = p->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
    });
  }
  if (a.dim() == 2 && b.dim() == 1 && b.numel() == a.cols()) {
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.at(i * n + j) + b.at(j);
    return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()},
                          [m, n](Node<T>& self) {
      auto& pa = *self.parents[0];
      auto& pb = *self.parents[1];
      if (pa.requires_grad) {
        auto& g = pa.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
      }
      if (pb.requires_grad) {
        auto& g = pb.ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) g[j] += self.grad[i * n + j];
      }
    });
  }
  throw DimensionError("add: incompatible shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
}

template <typename T>
Tensor<T> add_col(const Tensor<T>& a, const Tensor<T>& v) {
  require_2d(a, "add_col");
  const std::size_t m = a.rows(), n = a.cols();
  if (v.dim() != 1 || v.numel() != m) {
    throw DimensionError("add_col: vector " + shape_str(v.shape()) + " does not match rows of " +
                         shape_str(a.shape()));
  }
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = a.at(i * n + j) + v.at(i);
  return make_result<T>(a.shape(), std::move(out), {a.node(), v.node()}, [m, n](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pv = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pv.requires_grad) {
      auto& g = pv.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) g[i] += self.grad[i * n + j];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "sub");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "mul");
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_result<T>(a.shape(), std::move(out), {a.node(), b.node()}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) {
      auto& g = pa.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb.value[i];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa.value[i];
    }
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset) {
  return unary(x, [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
  constexpr T k = T(0.044715);
  return unary(
      x,
      [](T v) { return T(0.5) * v * (T(1) + std::tanh(c * (v + k * v * v * v))); },
      [](T v, T) {
        const T t = std::tanh(c * (v + k * v * v * v));
        return T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * c * (T(1) + T(3) * k * v * v);
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  for (T v : x.values()) {
    if (std::isnan(v)) throw NumericalError("log: NaN argument");
    if (!(v > T(0))) throw DomainError("log: non-positive argument " + std::to_string(v));
  }
  return unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
  return unary(
      x, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v, T) { return (v > lo && v < hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const std::size_t d = parts[0].dim();
  if (d == 1) {
    if (axis != 0) throw DimensionError("concat: 1-D inputs only support axis 0");
    std::vector<T> out;
    std::vector<NodePtr<T>> parents;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
      if (p.dim() != 1) throw DimensionError("concat: mixed ranks");
      out.insert(out.end(), p.values().begin(), p.values().end());
      parents.push_back(p.node());
      sizes.push_back(p.numel());
    }
    const std::size_t total = out.size();
    return make_result<T>({total}, std::move(out), std::move(parents), [sizes](Node<T>& self) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < sizes.size(); ++k) {
        auto& p = *self.parents[k];
        if (p.requires_grad) {
          auto& g = p.ensure_grad();
          for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += self.grad[off + i];
        }
        off += sizes[k];
      }
    });
  }
  if (d != 2 || axis > 1) throw DimensionError("concat: expects 2-D inputs with axis 0 or 1");
  std::vector<NodePtr<T>> parents;
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  const std::size_t fixed = axis == 0 ? parts[0].cols() : parts[0].rows();
  for (const auto& p : parts) {
    if (p.dim() != 2 || (axis == 0 ? p.cols() : p.rows()) != fixed) {
      throw DimensionError("concat: shape mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()) + " along axis " + std::to_string(axis));
    }
    parents.push_back(p.node());
    const std::size_t e = axis == 0 ? p.rows() : p.cols();
    extents.push_back(e);
    total += e;
  }
  if (axis == 0) {
    std::vector<T> out;
    out.reserve(total * fixed);
    for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
    return make_result<T>({total, fixed}, std::move(out), std::move(parents),
                          [extents, fixed](Node<T>& self) {
      std::size_t off = 0;
      for (std::size_t k = 0; k < extents.size(); ++k) {
        auto& p = *self.parents[k];
        const std::size_t cnt = extents[k] * fixed;
        if (p.requires_grad) {
          auto& g = p.ensure_grad();
          for (std::size_t i = 0; i < cnt; ++i) g[i] += self.grad[off + i];
        }
        off += cnt;
      }
    });
  }
  std::vector<T> out(fixed * total);
  std::size_t coff = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < fixed; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i * total + coff + j] = p.at(i * c + j);
    coff += c;
  }
  return make_result<T>({fixed, total}, std::move(out), std::move(parents),
                        [extents, fixed, total](Node<T>& self) {
    std::size_t coff = 0;
    for (std::size_t k = 0; k < extents.size(); ++k) {
      auto& p = *self.parents[k];
      const std::size_t c = extents[k];
      if (p.requires_grad) {
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < fixed; ++i)
          for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[i * total + coff + j];
      }
      coff += c;
    }
  });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis) {
  require_2d(x, "sum");
  if (axis > 1) throw DimensionError("sum: axis must be 0 or 1");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(axis == 0 ? n : m, T(0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += x.at(i * n + j);
  const std::size_t len = out.size();
  return make_result<T>({len}, std::move(out), {x.node()}, [m, n, axis](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[axis == 0 ? j : i];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis) {
  require_2d(x, "mean");
  const std::size_t count = axis == 0 ? x.rows() : x.cols();
  return scale(sum(x, axis), T(1) / static_cast<T>(count));
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v;
  return make_result<T>({1}, {acc}, {x.node()}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (auto& gi : g) gi += self.grad[0];
  });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  require_2d(x, "transpose");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x.at(i * n + j);
  return make_result<T>({n, m}, std::move(out), {x.node()}, [m, n](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[j * m + i];
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  return make_result<T>(std::move(shape), x.node()->value, {x.node()}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_2d(x, "slice_cols");
  const std::size_t m = x.rows(), n = x.cols();
  if (begin >= end || end > n) {
    throw DimensionError("slice_cols: range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ") outside " + shape_str(x.shape()));
  }
  const std::size_t w = end - begin;
  std::vector<T> out(m * w);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = x.at(i * n + begin + j);
  return make_result<T>({m, w}, std::move(out), {x.node()}, [m, n, w, begin](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * n + begin + j] += self.grad[i * w + j];
  });
}

template <typename T>
Tensor<T> frobenius_sq(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.values()) acc += v * v;
  return make_result<T>({1}, {acc}, {x.node()}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += T(2) * p.value[i] * self.grad[0];
  });
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& x) {
  require_2d(x, "softmax_rows");
  if (!x.all_finite()) throw NumericalError("softmax_rows: non-finite input");
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<T> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = x.values().data() + i * n;
    T mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    T z = 0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(row[j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  return make_result<T>({m, n}, std::move(out), {x.node()}, [m, n](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < m; ++i) {
      const T* y = self.value.data() + i * n;
      const T* gy = self.grad.data() + i * n;
      T dot = 0;
      for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += y[j] * (gy[j] - dot);
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps) {
  if (!(eps > T(0))) throw ContractError("layer_norm: eps must be positive");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: gain/bias " + shape_str(gain.shape()) + "/" +
                         shape_str(bias.shape()) + " do not match feature extent of " +
                         shape_str(x.shape()));
  }
  const std::size_t m = x.numel() / d;
  std::vector<T> out(x.numel());
  // Cached per-row normalised values and inverse std for backward.
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const T* row = x.values().data() + i * d;
    T mu = 0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<T>(d);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (row[j] - mu) * is;
      (*xhat)[i * d + j] = h;
      out[i * d + j] = h * gain.at(j) + bias.at(j);
    }
  }
  return make_result<T>(x.shape(), std::move(out), {x.node(), gain.node(), bias.node()},
                        [m, d, xhat, inv_std](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pg = *self.parents[1];
    auto& pb = *self.parents[2];
    const auto& gy = self.grad;
    if (pg.requires_grad) {
      auto& g = pg.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) g[j] += gy[i * d + j] * (*xhat)[i * d + j];
    }
    if (pb.requires_grad) {
      auto& g = pb.ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < d; ++j) g[j] += gy[i * d + j];
    }
    if (px.requires_grad) {
      auto& g = px.ensure_grad();
      const T inv_d = T(1) / static_cast<T>(d);
      for (std::size_t i = 0; i < m; ++i) {
        T mean_dh = 0, mean_dh_h = 0;
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = gy[i * d + j] * pg.value[j];
          mean_dh += dh;
          mean_dh_h += dh * (*xhat)[i * d + j];
        }
        mean_dh *= inv_d;
        mean_dh_h *= inv_d;
        for (std::size_t j = 0; j < d; ++j) {
          const T dh = gy[i * d + j] * pg.value[j];
          g[i * d + j] += (*inv_std)[i] * (dh - mean_dh - (*xhat)[i * d + j] * mean_dh_h);
        }
      }
    }
  });
}

template <typename T>
Tensor<T> grad_reversal(const Tensor<T>& x) {
  return make_result<T>(x.shape(), x.node()->value, {x.node()}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
  });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  const T s = T(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(x.numel());
  std::vector<T> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    (*mask)[i] = keep(rng) ? s : T(0);
    out[i] = x.at(i) * (*mask)[i];
  }
  return make_result<T>(x.shape(), std::move(out), {x.node()}, [mask](Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * (*mask)[i];
  });
}

#define MMER_INSTANTIATE_OPS(T)                                                              \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> add_col(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> scale(const Tensor<T>&, T);                                             \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                        \
  template Tensor<T> relu(const Tensor<T>&);                                                 \
  template Tensor<T> gelu(const Tensor<T>&);                                                 \
  template Tensor<T> sigmoid(const Tensor<T>&);                                              \
  template Tensor<T> log(const Tensor<T>&);                                                  \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                          \
  template Tensor<T> concat(std::span<const Tensor<T>>, std::size_t);                        \
  template Tensor<T> mean(const Tensor<T>&, std::size_t);                                    \
  template Tensor<T> sum(const Tensor<T>&);                                                  \
  template Tensor<T> sum(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> transpose(const Tensor<T>&);                                            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                       \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                 \
  template Tensor<T> frobenius_sq(const Tensor<T>&);                                         \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                         \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);    \
  template Tensor<T> grad_reversal(const Tensor<T>&);                                        \
  template Tensor<T> dropout(const Tensor<T>&, double, std::mt19937_64&);

MMER_INSTANTIATE_OPS(float)
MMER_INSTANTIATE_OPS(double)

}  // namespace mmer::ops
