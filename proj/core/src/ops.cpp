#include "pgait/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pgait/errors.hpp"

namespace pgait::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;
template <typename T>
using MapVec = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using CMapVec = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

int normalize_axis(int axis, int ndim) {
  if (axis < 0) axis += ndim;
  if (axis < 0 || axis >= ndim) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " +
                     std::to_string(ndim));
  }
  return axis;
}

// View of a tensor as [outer, len, inner] around `axis`.
struct AxisView {
  std::int64_t outer = 1;
  std::int64_t len = 1;
  std::int64_t inner = 1;
};

AxisView axis_view(const Shape& shape, int axis) {
  AxisView v;
  for (int i = 0; i < axis; ++i) v.outer *= shape[static_cast<std::size_t>(i)];
  v.len = shape[static_cast<std::size_t>(axis)];
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) v.inner *= shape[i];
  return v;
}

Shape without_axis(const Shape& shape, int axis) {
  Shape out = shape;
  out.erase(out.begin() + axis);
  return out;
}

// Broadcast bookkeeping: output shape plus per-operand strides expressed in
// output coordinates (0 where the operand is stretched).
struct Broadcast {
  Shape out;
  std::vector<std::int64_t> stride_a;
  std::vector<std::int64_t> stride_b;
  bool same = false;
};

std::vector<std::int64_t> contiguous_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) {
    st[static_cast<std::size_t>(i)] = st[static_cast<std::size_t>(i) + 1] * s[static_cast<std::size_t>(i) + 1];
  }
  return st;
}

Broadcast broadcast(const Shape& a, const Shape& b) {
  Broadcast bc;
  if (a == b) {
    bc.out = a;
    bc.same = true;
    return bc;
  }
  const std::size_t n = std::max(a.size(), b.size());
  bc.out.assign(n, 1);
  Shape pa(n, 1), pb(n, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(n - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(n - b.size()));
  for (std::size_t i = 0; i < n; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) {
      throw ShapeError("cannot broadcast " + to_string(a) + " with " + to_string(b));
    }
    bc.out[i] = std::max(pa[i], pb[i]);
  }
  auto sa = contiguous_strides(pa);
  auto sb = contiguous_strides(pb);
  for (std::size_t i = 0; i < n; ++i) {
    if (pa[i] == 1) sa[i] = 0;
    if (pb[i] == 1) sb[i] = 0;
  }
  bc.stride_a = std::move(sa);
  bc.stride_b = std::move(sb);
  return bc;
}

// Calls fn(i_out, i_a, i_b) for every output element, row-major.
template <typename Fn>
void for_each_broadcast(const Broadcast& bc, Fn&& fn) {
  const std::int64_t total = numel(bc.out);
  if (bc.same) {
    for (std::int64_t i = 0; i < total; ++i) fn(i, i, i);
    return;
  }
  if (total == 0) return;
  const std::size_t nd = bc.out.size();
  if (nd == 0) {
    fn(0, 0, 0);
    return;
  }
  const std::int64_t inner = bc.out[nd - 1];
  const std::int64_t sa_in = bc.stride_a[nd - 1];
  const std::int64_t sb_in = bc.stride_b[nd - 1];
  std::vector<std::int64_t> idx(nd, 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t base = 0; base < total; base += inner) {
    for (std::int64_t j = 0; j < inner; ++j) fn(base + j, ia + j * sa_in, ib + j * sb_in);
    // advance the outer multi-index
    for (int d = static_cast<int>(nd) - 2; d >= 0; --d) {
      const auto du = static_cast<std::size_t>(d);
      ++idx[du];
      ia += bc.stride_a[du];
      ib += bc.stride_b[du];
      if (idx[du] < bc.out[du]) break;
      ia -= bc.stride_a[du] * idx[du];
      ib -= bc.stride_b[du] * idx[du];
      idx[du] = 0;
    }
  }
}

template <typename T>
using NodeP = std::shared_ptr<Node<T>>;

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  auto bc = broadcast(a.shape(), b.shape());
  std::vector<T> out(static_cast<std::size_t>(numel(bc.out)));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for_each_broadcast(bc, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) { out[i] = pa[ia] + pb[ib]; });
  NodeP<T> na = a.node_ptr(), nb = b.node_ptr();
  return detail::make_result<T>("add", bc.out, std::move(out), {&a, &b}, [na, nb, bc](const Node<T>& self) {
    const auto& g = self.grad;
    T* ga = na->requires_grad ? na->grad_buffer().data() : nullptr;
    T* gb = nb->requires_grad ? nb->grad_buffer().data() : nullptr;
    for_each_broadcast(bc, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      if (ga) ga[ia] += g[static_cast<std::size_t>(i)];
      if (gb) gb[ib] += g[static_cast<std::size_t>(i)];
    });
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  auto bc = broadcast(a.shape(), b.shape());
  std::vector<T> out(static_cast<std::size_t>(numel(bc.out)));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for_each_broadcast(bc, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) { out[i] = pa[ia] - pb[ib]; });
  NodeP<T> na = a.node_ptr(), nb = b.node_ptr();
  return detail::make_result<T>("sub", bc.out, std::move(out), {&a, &b}, [na, nb, bc](const Node<T>& self) {
    const auto& g = self.grad;
    T* ga = na->requires_grad ? na->grad_buffer().data() : nullptr;
    T* gb = nb->requires_grad ? nb->grad_buffer().data() : nullptr;
    for_each_broadcast(bc, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      if (ga) ga[ia] += g[static_cast<std::size_t>(i)];
      if (gb) gb[ib] -= g[static_cast<std::size_t>(i)];
    });
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  auto bc = broadcast(a.shape(), b.shape());
  std::vector<T> out(static_cast<std::size_t>(numel(bc.out)));
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for_each_broadcast(bc, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) { out[i] = pa[ia] * pb[ib]; });
  NodeP<T> na = a.node_ptr(), nb = b.node_ptr();
  return detail::make_result<T>("mul", bc.out, std::move(out), {&a, &b}, [na, nb, bc](const Node<T>& self) {
    const auto& g = self.grad;
    const T* xa = na->data.data();
    const T* xb = nb->data.data();
    T* ga = na->requires_grad ? na->grad_buffer().data() : nullptr;
    T* gb = nb->requires_grad ? nb->grad_buffer().data() : nullptr;
    for_each_broadcast(bc, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      const T gi = g[static_cast<std::size_t>(i)];
      if (ga) ga[ia] += gi * xb[ib];
      if (gb) gb[ib] += gi * xa[ia];
    });
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= factor;
  NodeP<T> na = a.node_ptr();
  return detail::make_result<T>("scale", a.shape(), std::move(out), {&a}, [na, factor](const Node<T>& self) {
    auto& ga = na->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * self.grad[i];
  });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += value;
  NodeP<T> na = a.node_ptr();
  return detail::make_result<T>("add_scalar", a.shape(), std::move(out), {&a}, [na](const Node<T>& self) {
    auto& ga = na->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  NodeP<T> na = a.node_ptr();
  return detail::make_result<T>("relu", a.shape(), std::move(out), {&a}, [na](const Node<T>& self) {
    auto& ga = na->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) {
      if (na->data[i] > T(0)) ga[i] += self.grad[i];
    }
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw ShapeError("cannot reshape " + to_string(a.shape()) + " to " + to_string(shape));
  }
  std::vector<T> out(a.data().begin(), a.data().end());
  NodeP<T> na = a.node_ptr();
  return detail::make_result<T>("reshape", std::move(shape), std::move(out), {&a}, [na](const Node<T>& self) {
    auto& ga = na->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<int>& perm) {
  const auto& in_shape = a.shape();
  const std::size_t nd = in_shape.size();
  if (perm.size() != nd) throw ShapeError("permute: rank mismatch");
  std::vector<bool> seen(nd, false);
  Shape out_shape(nd);
  for (std::size_t i = 0; i < nd; ++i) {
    const int p = perm[i];
    if (p < 0 || static_cast<std::size_t>(p) >= nd || seen[static_cast<std::size_t>(p)]) {
      throw ShapeError("permute: invalid permutation");
    }
    seen[static_cast<std::size_t>(p)] = true;
    out_shape[i] = in_shape[static_cast<std::size_t>(p)];
  }
  // Source strides in output coordinates.
  const auto in_strides = contiguous_strides(in_shape);
  Broadcast walk;
  walk.out = out_shape;
  walk.stride_a.resize(nd);
  walk.stride_b.assign(nd, 0);
  for (std::size_t i = 0; i < nd; ++i) walk.stride_a[i] = in_strides[static_cast<std::size_t>(perm[i])];

  std::vector<T> out(static_cast<std::size_t>(a.numel()));
  const T* src = a.data().data();
  for_each_broadcast(walk, [&](std::int64_t i, std::int64_t ia, std::int64_t) { out[i] = src[ia]; });
  NodeP<T> na = a.node_ptr();
  return detail::make_result<T>("permute", out_shape, std::move(out), {&a}, [na, walk](const Node<T>& self) {
    auto& ga = na->grad_buffer();
    for_each_broadcast(walk, [&](std::int64_t i, std::int64_t ia, std::int64_t) {
      ga[static_cast<std::size_t>(ia)] += self.grad[static_cast<std::size_t>(i)];
    });
  });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const int nd = parts[0].ndim();
  axis = normalize_axis(axis, nd);
  Shape out_shape = parts[0].shape();
  std::int64_t total_len = 0;
  for (const auto& p : parts) {
    if (p.ndim() != nd) throw ShapeError("concat: rank mismatch");
    for (int d = 0; d < nd; ++d) {
      if (d != axis && p.shape()[static_cast<std::size_t>(d)] != out_shape[static_cast<std::size_t>(d)]) {
        throw ShapeError("concat: " + to_string(p.shape()) + " vs " + to_string(out_shape));
      }
    }
    total_len += p.shape()[static_cast<std::size_t>(axis)];
  }
  out_shape[static_cast<std::size_t>(axis)] = total_len;
  const AxisView ov = axis_view(out_shape, axis);
  std::vector<T> out(static_cast<std::size_t>(numel(out_shape)));
  std::vector<std::int64_t> offsets;
  std::int64_t offset = 0;
  for (const auto& p : parts) {
    const std::int64_t len = p.shape()[static_cast<std::size_t>(axis)];
    const T* src = p.data().data();
    for (std::int64_t o = 0; o < ov.outer; ++o) {
      std::copy_n(src + o * len * ov.inner, len * ov.inner, out.data() + (o * total_len + offset) * ov.inner);
    }
    offsets.push_back(offset);
    offset += len;
  }
  std::vector<NodeP<T>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node_ptr());
  return detail::make_result<T>(
      "concat", out_shape, std::move(out), parts, [nodes, offsets, ov, total_len, axis](const Node<T>& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
          if (!nodes[k]->requires_grad) continue;
          const std::int64_t len = nodes[k]->shape[static_cast<std::size_t>(axis)];
          auto& g = nodes[k]->grad_buffer();
          for (std::int64_t o = 0; o < ov.outer; ++o) {
            const T* src = self.grad.data() + (o * total_len + offsets[k]) * ov.inner;
            T* dst = g.data() + o * len * ov.inner;
            for (std::int64_t i = 0; i < len * ov.inner; ++i) dst[i] += src[i];
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Tensor<T> max_over(const Tensor<T>& a, int axis) {
  axis = normalize_axis(axis, a.ndim());
  const AxisView v = axis_view(a.shape(), axis);
  if (v.len == 0) throw ShapeError("max_over an empty axis");
  std::vector<T> out(static_cast<std::size_t>(v.outer * v.inner));
  std::vector<std::int32_t> arg(out.size(), 0);
  const T* x = a.data().data();
  for (std::int64_t o = 0; o < v.outer; ++o) {
    const T* base = x + o * v.len * v.inner;
    T* dst = out.data() + o * v.inner;
    std::int32_t* am = arg.data() + o * v.inner;
    std::copy_n(base, v.inner, dst);
    for (std::int64_t l = 1; l < v.len; ++l) {
      const T* row = base + l * v.inner;
      for (std::int64_t i = 0; i < v.inner; ++i) {
        if (row[i] > dst[i]) {
          dst[i] = row[i];
          am[i] = static_cast<std::int32_t>(l);
        }
      }
    }
  }
  NodeP<T> na = a.node_ptr();
  return detail::make_result<T>("max_over", without_axis(a.shape(), axis), std::move(out), {&a},
                                [na, v, arg = std::move(arg)](const Node<T>& self) {
                                  auto& ga = na->grad_buffer();
                                  for (std::int64_t o = 0; o < v.outer; ++o) {
                                    for (std::int64_t i = 0; i < v.inner; ++i) {
                                      const std::size_t k = static_cast<std::size_t>(o * v.inner + i);
                                      ga[static_cast<std::size_t>((o * v.len + arg[k]) * v.inner + i)] += self.grad[k];
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> mean_over(const Tensor<T>& a, int axis) {
  axis = normalize_axis(axis, a.ndim());
  const AxisView v = axis_view(a.shape(), axis);
  if (v.len == 0) throw ShapeError("mean_over an empty axis");
  std::vector<T> out(static_cast<std::size_t>(v.outer * v.inner), T(0));
  const T* x = a.data().data();
  const T inv = T(1) / static_cast<T>(v.len);
  for (std::int64_t o = 0; o < v.outer; ++o) {
    T* dst = out.data() + o * v.inner;
    for (std::int64_t l = 0; l < v.len; ++l) {
      const T* row = x + (o * v.len + l) * v.inner;
      for (std::int64_t i = 0; i < v.inner; ++i) dst[i] += row[i];
    }
    for (std::int64_t i = 0; i < v.inner; ++i) dst[i] *= inv;
  }
  NodeP<T> na = a.node_ptr();
  return detail::make_result<T>("mean_over", without_axis(a.shape(), axis), std::move(out), {&a},
                                [na, v, inv](const Node<T>& self) {
                                  auto& ga = na->grad_buffer();
                                  for (std::int64_t o = 0; o < v.outer; ++o) {
                                    const T* g = self.grad.data() + o * v.inner;
                                    for (std::int64_t l = 0; l < v.len; ++l) {
                                      T* dst = ga.data() + (o * v.len + l) * v.inner;
                                      for (std::int64_t i = 0; i < v.inner; ++i) dst[i] += g[i] * inv;
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = T(0);
  for (T x : a.data()) total += x;
  NodeP<T> na = a.node_ptr();
  return detail::make_result<T>("sum", {}, {total}, {&a}, [na](const Node<T>& self) {
    auto& ga = na->grad_buffer();
    for (auto& g : ga) g += self.grad[0];
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  if (a.numel() == 0) throw ShapeError("mean of an empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

template <typename T>
Tensor<T> l2_normalize(const Tensor<T>& a, int axis, T eps) {
  axis = normalize_axis(axis, a.ndim());
  const AxisView v = axis_view(a.shape(), axis);
  std::vector<T> out(a.data().begin(), a.data().end());
  std::vector<T> norms(static_cast<std::size_t>(v.outer * v.inner));
  for (std::int64_t o = 0; o < v.outer; ++o) {
    for (std::int64_t i = 0; i < v.inner; ++i) {
      T ss = T(0);
      for (std::int64_t l = 0; l < v.len; ++l) {
        const T x = out[static_cast<std::size_t>((o * v.len + l) * v.inner + i)];
        ss += x * x;
      }
      const T n = std::max(std::sqrt(ss), eps);
      norms[static_cast<std::size_t>(o * v.inner + i)] = n;
      for (std::int64_t l = 0; l < v.len; ++l) out[static_cast<std::size_t>((o * v.len + l) * v.inner + i)] /= n;
    }
  }
  NodeP<T> na = a.node_ptr();
  return detail::make_result<T>(
      "l2_normalize", a.shape(), std::move(out), {&a}, [na, v, eps, norms = std::move(norms)](const Node<T>& self) {
        auto& ga = na->grad_buffer();
        for (std::int64_t o = 0; o < v.outer; ++o) {
          for (std::int64_t i = 0; i < v.inner; ++i) {
            const T n = norms[static_cast<std::size_t>(o * v.inner + i)];
            const bool clamped = !(n > eps);
            T dot = T(0);
            for (std::int64_t l = 0; l < v.len; ++l) {
              const auto k = static_cast<std::size_t>((o * v.len + l) * v.inner + i);
              dot += self.data[k] * self.grad[k];
            }
            for (std::int64_t l = 0; l < v.len; ++l) {
              const auto k = static_cast<std::size_t>((o * v.len + l) * v.inner + i);
              ga[k] += clamped ? self.grad[k] / n : (self.grad[k] - self.data[k] * dot) / n;
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Matrix products

namespace {

// out[0:n] = a[0:k] * B[k, n], accumulating over k in index order.
template <typename T>
void row_times(const T* a, const T* b, std::int64_t k, std::int64_t n, T* out) {
  std::fill_n(out, n, T(0));
  for (std::int64_t t = 0; t < k; ++t) {
    const T s = a[t];
    const T* br = b + t * n;
    for (std::int64_t j = 0; j < n; ++j) out[j] += s * br[j];
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() < 2 || b.ndim() < 2) throw ShapeError("matmul operands need rank >= 2");
  const std::int64_t m = a.dim(-2), k = a.dim(-1);
  const std::int64_t kb = b.dim(-2), n = b.dim(-1);
  if (k != kb) {
    throw ShapeError("matmul: inner dims differ, " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const Shape lead_a(a.shape().begin(), a.shape().end() - 2);
  const Shape lead_b(b.shape().begin(), b.shape().end() - 2);
  enum class Form { kFlatLeft, kBroadcastLeft, kBatched } form;
  Shape lead;
  if (lead_b.empty()) {
    form = Form::kFlatLeft;
    lead = lead_a;
  } else if (lead_a.empty()) {
    form = Form::kBroadcastLeft;
    lead = lead_b;
  } else if (lead_a == lead_b) {
    form = Form::kBatched;
    lead = lead_a;
  } else {
    throw ShapeError("matmul: batch dims differ, " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const std::int64_t batch = numel(lead);
  Shape out_shape = lead;
  out_shape.push_back(m);
  out_shape.push_back(n);
  std::vector<T> out(static_cast<std::size_t>(batch * m * n));

  // Row by row with a fixed accumulation order: a row's result does not
  // depend on where it sits in the batch.
  const T* pa = a.data().data();
  const T* pb = b.data().data();
  for (std::int64_t i = 0; i < batch; ++i) {
    const T* ai = pa + (form == Form::kBroadcastLeft ? 0 : i * m * k);
    const T* bi = pb + (form == Form::kFlatLeft ? 0 : i * k * n);
    for (std::int64_t r = 0; r < m; ++r) row_times(ai + r * k, bi, k, n, out.data() + (i * m + r) * n);
  }

  NodeP<T> na = a.node_ptr(), nb = b.node_ptr();
  return detail::make_result<T>("matmul", out_shape, std::move(out), {&a, &b},
                                [na, nb, form, batch, m, k, n](const Node<T>& self) {
                                  const T* g = self.grad.data();
                                  const T* pa = na->data.data();
                                  const T* pb = nb->data.data();
                                  if (form == Form::kFlatLeft) {
                                    CMapMat<T> G(g, batch * m, n);
                                    if (na->requires_grad) {
                                      MapMat<T> GA(na->grad_buffer().data(), batch * m, k);
                                      GA.noalias() += G * CMapMat<T>(pb, k, n).transpose();
                                    }
                                    if (nb->requires_grad) {
                                      MapMat<T> GB(nb->grad_buffer().data(), k, n);
                                      GB.noalias() += CMapMat<T>(pa, batch * m, k).transpose() * G;
                                    }
                                    return;
                                  }
                                  for (std::int64_t i = 0; i < batch; ++i) {
                                    const std::int64_t a_off = form == Form::kBatched ? i * m * k : 0;
                                    CMapMat<T> G(g + i * m * n, m, n);
                                    if (na->requires_grad) {
                                      MapMat<T> GA(na->grad_buffer().data() + a_off, m, k);
                                      GA.noalias() += G * CMapMat<T>(pb + i * k * n, k, n).transpose();
                                    }
                                    if (nb->requires_grad) {
                                      MapMat<T> GB(nb->grad_buffer().data() + i * k * n, k, n);
                                      GB.noalias() += CMapMat<T>(pa + a_off, m, k).transpose() * G;
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> node_mix(const Tensor<T>& adjacency, const Tensor<T>& x) {
  if (adjacency.ndim() != 2 || adjacency.dim(0) != adjacency.dim(1)) {
    throw ShapeError("node_mix: adjacency must be square, got " + to_string(adjacency.shape()));
  }
  if (x.ndim() < 2 || x.dim(-2) != adjacency.dim(0)) {
    throw ShapeError("node_mix: features " + to_string(x.shape()) + " vs adjacency " + to_string(adjacency.shape()));
  }
  const std::int64_t nodes = adjacency.dim(0), c = x.dim(-1);
  const std::int64_t lead = x.numel() / std::max<std::int64_t>(1, nodes * c);
  const T* pa = adjacency.data().data();
  const T* px = x.data().data();
  std::vector<T> out(static_cast<std::size_t>(x.numel()));
  std::vector<T> terms;
  terms.reserve(static_cast<std::size_t>(nodes));
  for (std::int64_t l = 0; l < lead; ++l) {
    const T* xl = px + l * nodes * c;
    T* ol = out.data() + l * nodes * c;
    for (std::int64_t i = 0; i < nodes; ++i) {
      for (std::int64_t f = 0; f < c; ++f) {
        terms.clear();
        for (std::int64_t j = 0; j < nodes; ++j) {
          const T w = pa[i * nodes + j];
          if (w != T(0)) terms.push_back(w * xl[j * c + f]);
        }
        std::sort(terms.begin(), terms.end());
        T acc = T(0);
        for (T t : terms) acc += t;
        ol[i * c + f] = acc;
      }
    }
  }
  NodeP<T> na = adjacency.node_ptr(), nx = x.node_ptr();
  return detail::make_result<T>("node_mix", x.shape(), std::move(out), {&adjacency, &x},
                                [na, nx, nodes, c, lead](const Node<T>& self) {
                                  const T* g = self.grad.data();
                                  const T* pa = na->data.data();
                                  const T* px = nx->data.data();
                                  T* ga = na->requires_grad ? na->grad_buffer().data() : nullptr;
                                  T* gx = nx->requires_grad ? nx->grad_buffer().data() : nullptr;
                                  for (std::int64_t l = 0; l < lead; ++l) {
                                    const std::int64_t off = l * nodes * c;
                                    for (std::int64_t i = 0; i < nodes; ++i) {
                                      for (std::int64_t j = 0; j < nodes; ++j) {
                                        const T w = pa[i * nodes + j];
                                        T dot = T(0);
                                        for (std::int64_t f = 0; f < c; ++f) {
                                          const T gi = g[off + i * c + f];
                                          if (gx) gx[off + j * c + f] += w * gi;
                                          dot += gi * px[off + j * c + f];
                                        }
                                        if (ga) ga[i * nodes + j] += dot;
                                      }
                                    }
                                  }
                                });
}

// ---------------------------------------------------------------------------
// Convolution

namespace {

struct ConvGeometry {
  std::int64_t cin, h, w, kh, kw, ho, wo;
  int stride, pad;
};

// Output columns [lo, hi) read input columns inside [0, w) for kernel column kj.
inline void valid_range(const ConvGeometry& g, std::int64_t kj, std::int64_t& lo, std::int64_t& hi) {
  const std::int64_t off = kj - g.pad;
  lo = off >= 0 ? 0 : (-off + g.stride - 1) / g.stride;
  hi = g.w - 1 - off < 0 ? 0 : std::min<std::int64_t>(g.wo, (g.w - 1 - off) / g.stride + 1);
  lo = std::min(lo, hi);
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::int64_t plane = g.ho * g.wo;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    const T* xc = x + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        T* row = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        std::int64_t lo, hi;
        valid_range(g, kj, lo, hi);
        const std::int64_t off = kj - g.pad;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ki;
          T* dst = row + oy * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(dst, g.wo, T(0));
            continue;
          }
          const T* src = xc + iy * g.w;
          std::fill_n(dst, lo, T(0));
          if (g.stride == 1) {
            if (hi > lo) std::copy(src + lo + off, src + hi + off, dst + lo);
          } else {
            for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride + off];
          }
          std::fill(dst + hi, dst + g.wo, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* x) {
  const std::int64_t plane = g.ho * g.wo;
  for (std::int64_t c = 0; c < g.cin; ++c) {
    T* xc = x + c * g.h * g.w;
    for (std::int64_t ki = 0; ki < g.kh; ++ki) {
      for (std::int64_t kj = 0; kj < g.kw; ++kj) {
        const T* row = col + ((c * g.kh + ki) * g.kw + kj) * plane;
        std::int64_t lo, hi;
        valid_range(g, kj, lo, hi);
        const std::int64_t off = kj - g.pad;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride - g.pad + ki;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + oy * g.wo;
          T* dst = xc + iy * g.w;
          for (std::int64_t ox = lo; ox < hi; ++ox) dst[ox * g.stride + off] += src[ox];
        }
      }
    }
  }
}

bool is_pointwise(const ConvGeometry& g) { return g.kh == 1 && g.kw == 1 && g.stride == 1 && g.pad == 0; }

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, Conv2dOptions opt) {
  if (input.ndim() != 4 || weight.ndim() != 4) {
    throw ShapeError("conv2d expects 4-d input and weight, got " + to_string(input.shape()) + " and " +
                     to_string(weight.shape()));
  }
  if (opt.stride < 1) throw InvalidArgument("conv2d stride must be >= 1");
  if (opt.padding < 0) throw InvalidArgument("conv2d padding must be >= 0");
  const std::int64_t batch = input.dim(0);
  const std::int64_t cout = weight.dim(0);
  ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), weight.dim(2), weight.dim(3), 0, 0, opt.stride,
                 opt.padding};
  if (weight.dim(1) != g.cin) {
    throw ShapeError("conv2d channel mismatch: input " + to_string(input.shape()) + ", weight " +
                     to_string(weight.shape()));
  }
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) throw ShapeError("conv2d kernel larger than padded input");
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

  const std::int64_t krows = g.cin * g.kh * g.kw;
  const std::int64_t plane = g.ho * g.wo;
  std::vector<T> out(static_cast<std::size_t>(batch * cout * plane));
  std::vector<T> col(is_pointwise(g) ? 0 : static_cast<std::size_t>(krows * plane));
  CMapMat<T> W(weight.data().data(), cout, krows);
  for (std::int64_t nidx = 0; nidx < batch; ++nidx) {
    const T* x = input.data().data() + nidx * g.cin * g.h * g.w;
    const T* cols = x;
    if (!is_pointwise(g)) {
      im2col(x, g, col.data());
      cols = col.data();
    }
    MapMat<T> Y(out.data() + nidx * cout * plane, cout, plane);
    Y.noalias() = W * CMapMat<T>(cols, krows, plane);
  }

  NodeP<T> nx = input.node_ptr(), nw = weight.node_ptr();
  return detail::make_result<T>(
      "conv2d", {batch, cout, g.ho, g.wo}, std::move(out), {&input, &weight},
      [nx, nw, g, batch, cout, krows, plane](const Node<T>& self) {
        std::vector<T> col(is_pointwise(g) ? 0 : static_cast<std::size_t>(krows * plane));
        std::vector<T> dcol(static_cast<std::size_t>(krows * plane));
        CMapMat<T> W(nw->data.data(), cout, krows);
        T* gw = nw->requires_grad ? nw->grad_buffer().data() : nullptr;
        T* gx = nx->requires_grad ? nx->grad_buffer().data() : nullptr;
        for (std::int64_t nidx = 0; nidx < batch; ++nidx) {
          CMapMat<T> G(self.grad.data() + nidx * cout * plane, cout, plane);
          const T* x = nx->data.data() + nidx * g.cin * g.h * g.w;
          if (gw) {
            const T* cols = x;
            if (!is_pointwise(g)) {
              im2col(x, g, col.data());
              cols = col.data();
            }
            MapMat<T>(gw, cout, krows).noalias() += G * CMapMat<T>(cols, krows, plane).transpose();
          }
          if (gx) {
            T* dx = gx + nidx * g.cin * g.h * g.w;
            if (is_pointwise(g)) {
              MapMat<T>(dx, krows, plane).noalias() += W.transpose() * G;
            } else {
              MapMat<T>(dcol.data(), krows, plane).noalias() = W.transpose() * G;
              col2im_add(dcol.data(), g, dx);
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Batch normalisation

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T> running_mean, Tensor<T> running_var, BatchNormOptions opt) {
  if (input.ndim() < 2) throw ShapeError("batch_norm expects [N, C, ...], got " + to_string(input.shape()));
  const std::int64_t n = input.dim(0);
  const std::int64_t c = input.dim(1);
  const std::int64_t spatial = input.numel() / std::max<std::int64_t>(1, n * c);
  for (const Tensor<T>* p : std::initializer_list<const Tensor<T>*>{&gamma, &beta, &running_mean, &running_var}) {
    if (p->numel() != c) {
      throw ShapeError("batch_norm parameter of shape " + to_string(p->shape()) + " for " + std::to_string(c) +
                       " channels");
    }
  }
  if (opt.training && n == 0) throw InvalidArgument("batch_norm: empty batch in training mode");

  const std::int64_t count = n * spatial;
  std::vector<T> mean_c(static_cast<std::size_t>(c)), inv_std(static_cast<std::size_t>(c));
  const T* x = input.data().data();
  if (opt.training) {
    auto rm = running_mean.data_mut();
    auto rv = running_var.data_mut();
    for (std::int64_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        s += CMapVec<T>(x + (i * c + ch) * spatial, spatial).template cast<double>().sum();
      }
      const double mu = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::int64_t i = 0; i < n; ++i) {
        ss += (CMapVec<T>(x + (i * c + ch) * spatial, spatial).template cast<double>() - mu).square().sum();
      }
      const double var = ss / static_cast<double>(count);
      mean_c[static_cast<std::size_t>(ch)] = static_cast<T>(mu);
      inv_std[static_cast<std::size_t>(ch)] = static_cast<T>(1.0 / std::sqrt(var + opt.eps));
      const double unbiased = count > 1 ? var * static_cast<double>(count) / static_cast<double>(count - 1) : var;
      const auto chs = static_cast<std::size_t>(ch);
      rm[chs] = static_cast<T>((1.0 - opt.momentum) * static_cast<double>(rm[chs]) + opt.momentum * mu);
      rv[chs] = static_cast<T>((1.0 - opt.momentum) * static_cast<double>(rv[chs]) + opt.momentum * unbiased);
    }
  } else {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const auto chs = static_cast<std::size_t>(ch);
      mean_c[chs] = running_mean.data()[chs];
      inv_std[chs] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var.data()[chs]) + opt.eps));
    }
  }

  std::vector<T> out(static_cast<std::size_t>(input.numel()));
  const T* gm = gamma.data().data();
  const T* bt = beta.data().data();
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const auto chs = static_cast<std::size_t>(ch);
      const T a = gm[chs] * inv_std[chs];
      const T b = bt[chs] - a * mean_c[chs];
      MapVec<T>(out.data() + (i * c + ch) * spatial, spatial) =
          CMapVec<T>(x + (i * c + ch) * spatial, spatial) * a + b;
    }
  }

  NodeP<T> nx = input.node_ptr(), ng = gamma.node_ptr(), nb = beta.node_ptr();
  const bool training = opt.training;
  return detail::make_result<T>(
      "batch_norm", input.shape(), std::move(out), {&input, &gamma, &beta},
      [nx, ng, nb, n, c, spatial, count, training, mean_c = std::move(mean_c),
       inv_std = std::move(inv_std)](const Node<T>& self) {
        const T* x = nx->data.data();
        const T* g = self.grad.data();
        T* gx = nx->requires_grad ? nx->grad_buffer().data() : nullptr;
        T* gg = ng->requires_grad ? ng->grad_buffer().data() : nullptr;
        T* gb = nb->requires_grad ? nb->grad_buffer().data() : nullptr;
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const auto chs = static_cast<std::size_t>(ch);
          const double mu = static_cast<double>(mean_c[chs]);
          const double is = static_cast<double>(inv_std[chs]);
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::int64_t i = 0; i < n; ++i) {
            const auto p = CMapVec<T>(x + (i * c + ch) * spatial, spatial).template cast<double>();
            const auto q = CMapVec<T>(g + (i * c + ch) * spatial, spatial).template cast<double>();
            sum_g += q.sum();
            sum_gx += (q * (p - mu)).sum();
          }
          sum_gx *= is;
          if (gg) gg[chs] += static_cast<T>(sum_gx);
          if (gb) gb[chs] += static_cast<T>(sum_g);
          if (!gx) continue;
          const double gam = static_cast<double>(ng->data[chs]);
          for (std::int64_t i = 0; i < n; ++i) {
            const auto p = CMapVec<T>(x + (i * c + ch) * spatial, spatial).template cast<double>();
            const auto q = CMapVec<T>(g + (i * c + ch) * spatial, spatial).template cast<double>();
            MapVec<T> dx(gx + (i * c + ch) * spatial, spatial);
            if (training) {
              const double scale_all = gam * is / static_cast<double>(count);
              dx += (scale_all * (static_cast<double>(count) * q - sum_g - (p - mu) * (is * sum_gx))).template cast<T>();
            } else {
              dx += (gam * is * q).template cast<T>();
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Losses

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int64_t> targets) {
  if (logits.ndim() != 2) throw ShapeError("softmax_cross_entropy expects [B, C] logits");
  const std::int64_t b = logits.dim(0), c = logits.dim(1);
  if (static_cast<std::int64_t>(targets.size()) != b) throw ShapeError("softmax_cross_entropy: target count mismatch");
  if (b == 0) throw InvalidArgument("softmax_cross_entropy: empty batch");
  std::vector<T> prob(static_cast<std::size_t>(b * c));
  double loss = 0.0;
  const T* z = logits.data().data();
  for (std::int64_t i = 0; i < b; ++i) {
    const std::int64_t t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= c) {
      throw InvalidArgument("softmax_cross_entropy: target " + std::to_string(t) + " outside [0, " +
                            std::to_string(c) + ")");
    }
    const T* row = z + i * c;
    const T mx = *std::max_element(row, row + c);
    double denom = 0.0;
    for (std::int64_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
    const double log_denom = std::log(denom);
    for (std::int64_t j = 0; j < c; ++j) {
      prob[static_cast<std::size_t>(i * c + j)] = static_cast<T>(std::exp(static_cast<double>(row[j] - mx) - log_denom));
    }
    loss += log_denom - static_cast<double>(row[t] - mx);
  }
  loss /= static_cast<double>(b);
  std::vector<std::int64_t> tgt(targets.begin(), targets.end());
  NodeP<T> nz = logits.node_ptr();
  return detail::make_result<T>("softmax_cross_entropy", {}, {static_cast<T>(loss)}, {&logits},
                                [nz, b, c, prob = std::move(prob), tgt = std::move(tgt)](const Node<T>& self) {
                                  auto& gz = nz->grad_buffer();
                                  const T s = self.grad[0] / static_cast<T>(b);
                                  for (std::int64_t i = 0; i < b; ++i) {
                                    for (std::int64_t j = 0; j < c; ++j) {
                                      const auto k = static_cast<std::size_t>(i * c + j);
                                      gz[k] += s * (prob[k] - (j == tgt[static_cast<std::size_t>(i)] ? T(1) : T(0)));
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> pairwise_euclidean(const Tensor<T>& x, T eps) {
  if (x.ndim() != 3) throw ShapeError("pairwise_euclidean expects [G, B, d], got " + to_string(x.shape()));
  const std::int64_t groups = x.dim(0), b = x.dim(1), d = x.dim(2);
  std::vector<T> out(static_cast<std::size_t>(groups * b * b));
  const T* px = x.data().data();
  for (std::int64_t gi = 0; gi < groups; ++gi) {
    for (std::int64_t i = 0; i < b; ++i) {
      const T* xi = px + (gi * b + i) * d;
      for (std::int64_t j = 0; j < b; ++j) {
        const T* xj = px + (gi * b + j) * d;
        T ss = T(0);
        for (std::int64_t k = 0; k < d; ++k) {
          const T diff = xi[k] - xj[k];
          ss += diff * diff;
        }
        out[static_cast<std::size_t>((gi * b + i) * b + j)] = std::sqrt(ss + eps);
      }
    }
  }
  NodeP<T> nx = x.node_ptr();
  return detail::make_result<T>("pairwise_euclidean", {groups, b, b}, std::move(out), {&x},
                                [nx, groups, b, d](const Node<T>& self) {
                                  auto& gx = nx->grad_buffer();
                                  const T* px = nx->data.data();
                                  for (std::int64_t gi = 0; gi < groups; ++gi) {
                                    for (std::int64_t i = 0; i < b; ++i) {
                                      for (std::int64_t j = 0; j < b; ++j) {
                                        const auto k = static_cast<std::size_t>((gi * b + i) * b + j);
                                        const T gk = self.grad[k];
                                        if (gk == T(0) || i == j) continue;
                                        const T coef = gk / self.data[k];
                                        const T* xi = px + (gi * b + i) * d;
                                        const T* xj = px + (gi * b + j) * d;
                                        T* gi_ = gx.data() + (gi * b + i) * d;
                                        T* gj_ = gx.data() + (gi * b + j) * d;
                                        for (std::int64_t t = 0; t < d; ++t) {
                                          const T diff = coef * (xi[t] - xj[t]);
                                          gi_[t] += diff;
                                          gj_[t] -= diff;
                                        }
                                      }
                                    }
                                  }
                                });
}

template <typename T>
Tensor<T> triplet_batch_all(const Tensor<T>& distances, std::span<const std::int64_t> labels, T margin) {
  if (distances.ndim() != 3 || distances.dim(1) != distances.dim(2)) {
    throw ShapeError("triplet_batch_all expects [G, B, B], got " + to_string(distances.shape()));
  }
  const std::int64_t groups = distances.dim(0), b = distances.dim(1);
  if (static_cast<std::int64_t>(labels.size()) != b) throw ShapeError("triplet_batch_all: label count mismatch");
  std::int64_t valid = 0;
  for (std::int64_t a = 0; a < b; ++a) {
    std::int64_t pos = 0, neg = 0;
    for (std::int64_t j = 0; j < b; ++j) {
      if (j == a) continue;
      (labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(a)] ? pos : neg) += 1;
    }
    valid += pos * neg;
  }
  if (valid == 0) throw InvalidArgument("triplet_batch_all: batch has no anchor/positive/negative triple");

  const T* dist = distances.data().data();
  // Per group: sum and count of active hinge terms.
  std::vector<double> group_sum(static_cast<std::size_t>(groups), 0.0);
  std::vector<std::int64_t> group_count(static_cast<std::size_t>(groups), 0);
  for (std::int64_t gi = 0; gi < groups; ++gi) {
    const T* dm = dist + gi * b * b;
    for (std::int64_t a = 0; a < b; ++a) {
      for (std::int64_t p = 0; p < b; ++p) {
        if (p == a || labels[static_cast<std::size_t>(p)] != labels[static_cast<std::size_t>(a)]) continue;
        for (std::int64_t nn = 0; nn < b; ++nn) {
          if (labels[static_cast<std::size_t>(nn)] == labels[static_cast<std::size_t>(a)]) continue;
          const T term = dm[a * b + p] - dm[a * b + nn] + margin;
          if (term > T(0)) {
            group_sum[static_cast<std::size_t>(gi)] += static_cast<double>(term);
            ++group_count[static_cast<std::size_t>(gi)];
          }
        }
      }
    }
  }
  double total = 0.0;
  for (std::int64_t gi = 0; gi < groups; ++gi) {
    const auto gs = static_cast<std::size_t>(gi);
    if (group_count[gs] > 0) total += group_sum[gs] / static_cast<double>(group_count[gs]);
  }
  total /= static_cast<double>(groups);

  std::vector<std::int64_t> lab(labels.begin(), labels.end());
  NodeP<T> nd = distances.node_ptr();
  return detail::make_result<T>(
      "triplet_batch_all", {}, {static_cast<T>(total)}, {&distances},
      [nd, groups, b, margin, lab = std::move(lab), group_count = std::move(group_count)](const Node<T>& self) {
        auto& gd = nd->grad_buffer();
        const T* dist = nd->data.data();
        for (std::int64_t gi = 0; gi < groups; ++gi) {
          const std::int64_t cnt = group_count[static_cast<std::size_t>(gi)];
          if (cnt == 0) continue;
          const T w = self.grad[0] / static_cast<T>(cnt * groups);
          const T* dm = dist + gi * b * b;
          T* gm = gd.data() + gi * b * b;
          for (std::int64_t a = 0; a < b; ++a) {
            for (std::int64_t p = 0; p < b; ++p) {
              if (p == a || lab[static_cast<std::size_t>(p)] != lab[static_cast<std::size_t>(a)]) continue;
              for (std::int64_t nn = 0; nn < b; ++nn) {
                if (lab[static_cast<std::size_t>(nn)] == lab[static_cast<std::size_t>(a)]) continue;
                if (dm[a * b + p] - dm[a * b + nn] + margin > T(0)) {
                  gm[a * b + p] += w;
                  gm[a * b + nn] -= w;
                }
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------

#define PGAIT_INSTANTIATE_OPS(T)                                                                           \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                              \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                              \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                              \
  template Tensor<T> scale(const Tensor<T>&, T);                                                           \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                                      \
  template Tensor<T> relu(const Tensor<T>&);                                                               \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                     \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);                                   \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);                                           \
  template Tensor<T> max_over(const Tensor<T>&, int);                                                      \
  template Tensor<T> mean_over(const Tensor<T>&, int);                                                     \
  template Tensor<T> sum(const Tensor<T>&);                                                                \
  template Tensor<T> mean(const Tensor<T>&);                                                               \
  template Tensor<T> l2_normalize(const Tensor<T>&, int, T);                                               \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> node_mix(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, Conv2dOptions);                            \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>, Tensor<T>, \
                                BatchNormOptions);                                                         \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const std::int64_t>);               \
  template Tensor<T> pairwise_euclidean(const Tensor<T>&, T);                                              \
  template Tensor<T> triplet_batch_all(const Tensor<T>&, std::span<const std::int64_t>, T);

PGAIT_INSTANTIATE_OPS(float)
PGAIT_INSTANTIATE_OPS(double)

#undef PGAIT_INSTANTIATE_OPS

}  // namespace pgait::ad
