#include "xsib/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "xsib/core/errors.hpp"

namespace xsib::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

// Strides of `in` (right-aligned to `out`), zero where `in` broadcasts.
std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> st(out.size(), 0);
  std::size_t s = 1;
  const int offset = static_cast<int>(out.size()) - static_cast<int>(in.size());
  for (int i = static_cast<int>(in.size()) - 1; i >= 0; --i) {
    if (in[i] != 1) st[i + offset] = s;
    s *= static_cast<std::size_t>(in[i]);
  }
  return st;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const int da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const int db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Calls f(out_index, a_index, b_index) over the broadcast output.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa, const std::vector<std::size_t>& sb,
                        F&& f) {
  const std::size_t n = numel(out);
  const int r = static_cast<int>(out.size());
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  std::vector<int> idx(r, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (int d = r - 1; d >= 0; --d) {
      ++idx[d];
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

// Binary op with value fn and partials (da, db) evaluated at (a, b, out).
template <typename Fwd, typename Da, typename Db>
Tensor binary(const Tensor& a, const Tensor& b, Fwd fwd, Da da, Db db) {
  const Shape out = broadcast_shape(a.shape(), b.shape());
  std::vector<double> v(numel(out));
  const auto av = a.values();
  const auto bv = b.values();
  if (a.shape() == b.shape()) {
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = fwd(av[i], bv[i]);
    return make_result(out, std::move(v), {a, b}, [a, b, da, db](Node& n) {
      const auto av = a.values();
      const auto bv = b.values();
      Node* na = a.node();
      Node* nb = b.node();
      for (std::size_t i = 0; i < n.grad.size(); ++i) {
        const double g = n.grad[i];
        if (na->requires_grad) na->grad[i] += g * da(av[i], bv[i], n.value[i]);
        if (nb->requires_grad) nb->grad[i] += g * db(av[i], bv[i], n.value[i]);
      }
    });
  }
  const auto sa = broadcast_strides(a.shape(), out);
  const auto sb = broadcast_strides(b.shape(), out);
  for_each_broadcast(out, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) { v[i] = fwd(av[ia], bv[ib]); });
  return make_result(out, std::move(v), {a, b}, [a, b, da, db, sa, sb](Node& n) {
    const auto av = a.values();
    const auto bv = b.values();
    Node* na = a.node();
    Node* nb = b.node();
    for_each_broadcast(n.shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      const double g = n.grad[i];
      if (na->requires_grad) na->grad[ia] += g * da(av[ia], bv[ib], n.value[i]);
      if (nb->requires_grad) nb->grad[ib] += g * db(av[ia], bv[ib], n.value[i]);
    });
  });
}

// Unary op with derivative fn evaluated at (x, y).
template <typename Fwd, typename D>
Tensor unary(const Tensor& x, Fwd fwd, D deriv) {
  const auto xv = x.values();
  std::vector<double> v(xv.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = fwd(xv[i]);
  return make_result(x.shape(), std::move(v), {x}, [x, deriv](Node& n) {
    const auto xv = x.values();
    Node* nx = x.node();
    for (std::size_t i = 0; i < n.grad.size(); ++i) nx->grad[i] += n.grad[i] * deriv(xv[i], n.value[i]);
  });
}

int norm_axis(int axis, int rank) {
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw ShapeError("axis out of range");
  return axis;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

Tensor atan2(const Tensor& y, const Tensor& x) {
  return binary(
      y, x, [](double a, double b) { return std::atan2(a, b); },
      [](double a, double b, double) { return b / (a * a + b * b); },
      [](double a, double b, double) { return -a / (a * a + b * b); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(
      a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sin(const Tensor& x) {
  return unary(
      x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
  return unary(
      x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v, double) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

Tensor elu(const Tensor& x, double alpha) {
  return unary(
      x, [alpha](double v) { return v > 0 ? v : alpha * std::expm1(v); },
      [alpha](double v, double y) { return v > 0 ? 1.0 : y + alpha; });
}

Tensor matmul(const Tensor& x, const Tensor& w) {
  if (w.rank() != 2 || x.rank() < 1 || x.dim(-1) != w.dim(0)) {
    throw ShapeError("matmul: " + shape_str(x.shape()) + " x " + shape_str(w.shape()));
  }
  const int k = w.dim(0), n = w.dim(1);
  const int rows = static_cast<int>(x.size() / k);
  Shape out = x.shape();
  out.back() = n;
  std::vector<double> v(static_cast<std::size_t>(rows) * n);
  MapMat(v.data(), rows, n).noalias() = CMapMat(x.values().data(), rows, k) * CMapMat(w.values().data(), k, n);
  return make_result(out, std::move(v), {x, w}, [x, w, rows, k, n](Node& node) {
    CMapMat g(node.grad.data(), rows, n);
    if (x.requires_grad()) {
      MapMat(x.node()->grad.data(), rows, k).noalias() += g * CMapMat(w.values().data(), k, n).transpose();
    }
    if (w.requires_grad()) {
      MapMat(w.node()->grad.data(), k, n).noalias() += CMapMat(x.values().data(), rows, k).transpose() * g;
    }
  });
}

Tensor left_matmul(const Tensor& m, const Tensor& x) {
  if (m.rank() != 2 || x.rank() < 2 || x.dim(-2) != m.dim(1)) {
    throw ShapeError("left_matmul: " + shape_str(m.shape()) + " x " + shape_str(x.shape()));
  }
  const int r = m.dim(0), k = m.dim(1), n = x.dim(-1);
  const int batch = static_cast<int>(x.size() / (static_cast<std::size_t>(k) * n));
  Shape out = x.shape();
  out[out.size() - 2] = r;
  std::vector<double> v(static_cast<std::size_t>(batch) * r * n);
  CMapMat mm(m.values().data(), r, k);
  for (int b = 0; b < batch; ++b) {
    MapMat(v.data() + static_cast<std::size_t>(b) * r * n, r, n).noalias() =
        mm * CMapMat(x.values().data() + static_cast<std::size_t>(b) * k * n, k, n);
  }
  return make_result(out, std::move(v), {m, x}, [m, x, r, k, n, batch](Node& node) {
    CMapMat mm(m.values().data(), r, k);
    for (int b = 0; b < batch; ++b) {
      CMapMat g(node.grad.data() + static_cast<std::size_t>(b) * r * n, r, n);
      if (x.requires_grad()) {
        MapMat(x.node()->grad.data() + static_cast<std::size_t>(b) * k * n, k, n).noalias() += mm.transpose() * g;
      }
      if (m.requires_grad()) {
        MapMat(m.node()->grad.data(), r, k).noalias() +=
            g * CMapMat(x.values().data() + static_cast<std::size_t>(b) * k * n, k, n).transpose();
      }
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.rank() != 3 || w.rank() != 3 || b.rank() != 1 || x.dim(1) != w.dim(1) || b.dim(0) != w.dim(0) ||
      w.dim(2) % 2 == 0) {
    throw ShapeError("conv1d: x" + shape_str(x.shape()) + " w" + shape_str(w.shape()) + " b" + shape_str(b.shape()));
  }
  const int B = x.dim(0), Cin = x.dim(1), L = x.dim(2), Cout = w.dim(0), K = w.dim(2);
  const int pad = (K - 1) / 2;
  const int cols_w = Cin * K;
  // im2col: row (b, l), column (ci, k).
  auto cols = std::make_shared<std::vector<double>>(static_cast<std::size_t>(B) * L * cols_w, 0.0);
  const auto xv = x.values();
  for (int bb = 0; bb < B; ++bb) {
    for (int l = 0; l < L; ++l) {
      double* row = cols->data() + (static_cast<std::size_t>(bb) * L + l) * cols_w;
      for (int ci = 0; ci < Cin; ++ci) {
        const double* src = xv.data() + (static_cast<std::size_t>(bb) * Cin + ci) * L;
        for (int k = 0; k < K; ++k) {
          const int li = l + k - pad;
          if (li >= 0 && li < L) row[ci * K + k] = src[li];
        }
      }
    }
  }
  RowMat res = CMapMat(cols->data(), B * L, cols_w) * CMapMat(w.values().data(), Cout, cols_w).transpose();
  std::vector<double> v(static_cast<std::size_t>(B) * Cout * L);
  const auto bv = b.values();
  for (int bb = 0; bb < B; ++bb) {
    for (int co = 0; co < Cout; ++co) {
      double* dst = v.data() + (static_cast<std::size_t>(bb) * Cout + co) * L;
      for (int l = 0; l < L; ++l) dst[l] = res(bb * L + l, co) + bv[co];
    }
  }
  return make_result({B, Cout, L}, std::move(v), {x, w, b}, [x, w, b, cols, B, Cin, L, Cout, K, pad, cols_w](Node& n) {
    RowMat g(B * L, Cout);
    for (int bb = 0; bb < B; ++bb) {
      for (int co = 0; co < Cout; ++co) {
        const double* src = n.grad.data() + (static_cast<std::size_t>(bb) * Cout + co) * L;
        for (int l = 0; l < L; ++l) g(bb * L + l, co) = src[l];
      }
    }
    if (b.requires_grad()) {
      auto& gb = b.node()->grad;
      for (int co = 0; co < Cout; ++co) gb[co] += g.col(co).sum();
    }
    if (w.requires_grad()) {
      MapMat(w.node()->grad.data(), Cout, cols_w).noalias() += g.transpose() * CMapMat(cols->data(), B * L, cols_w);
    }
    if (x.requires_grad()) {
      RowMat gcols = g * CMapMat(w.values().data(), Cout, cols_w);
      auto& gx = x.node()->grad;
      for (int bb = 0; bb < B; ++bb) {
        for (int l = 0; l < L; ++l) {
          const double* row = gcols.data() + (static_cast<std::size_t>(bb) * L + l) * cols_w;
          for (int ci = 0; ci < Cin; ++ci) {
            double* dst = gx.data() + (static_cast<std::size_t>(bb) * Cin + ci) * L;
            for (int k = 0; k < K; ++k) {
              const int li = l + k - pad;
              if (li >= 0 && li < L) dst[li] += row[ci * K + k];
            }
          }
        }
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  int infer = -1;
  std::size_t known = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == -1) {
      infer = static_cast<int>(i);
    } else {
      known *= shape[i];
    }
  }
  if (infer >= 0) shape[infer] = static_cast<int>(x.size() / known);
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> v(x.values().begin(), x.values().end());
  return make_result(shape, std::move(v), {x}, [x](Node& n) {
    auto& gx = x.node()->grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) gx[i] += n.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
  const int r = x.rank();
  if (static_cast<int>(axes.size()) != r) throw ShapeError("permute: axes rank mismatch");
  Shape out(r);
  std::vector<std::size_t> in_strides(r);
  std::size_t s = 1;
  for (int i = r - 1; i >= 0; --i) {
    in_strides[i] = s;
    s *= x.shape()[i];
  }
  std::vector<std::size_t> st(r);
  for (int i = 0; i < r; ++i) {
    out[i] = x.shape()[axes[i]];
    st[i] = in_strides[axes[i]];
  }
  // Map each output element to its source index.
  auto src = std::make_shared<std::vector<std::size_t>>(x.size());
  const std::vector<std::size_t> zero(r, 0);
  for_each_broadcast(out, st, zero, [&](std::size_t i, std::size_t ia, std::size_t) { (*src)[i] = ia; });
  std::vector<double> v(x.size());
  const auto xv = x.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = xv[(*src)[i]];
  return make_result(out, std::move(v), {x}, [x, src](Node& n) {
    auto& gx = x.node()->grad;
    for (std::size_t i = 0; i < n.grad.size(); ++i) gx[(*src)[i]] += n.grad[i];
  });
}

Tensor slice(const Tensor& x, int axis, int begin, int end) {
  axis = norm_axis(axis, x.rank());
  const int d = x.dim(axis);
  if (begin < 0 || end > d || begin >= end) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) + ") of axis size " +
                     std::to_string(d));
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
  Shape out = x.shape();
  out[axis] = end - begin;
  const std::size_t chunk = static_cast<std::size_t>(end - begin) * inner;
  std::vector<double> v(outer * chunk);
  const auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.data() + (o * d + begin) * inner, chunk, v.data() + o * chunk);
  }
  return make_result(out, std::move(v), {x}, [x, outer, inner, d, begin, chunk](Node& n) {
    auto& gx = x.node()->grad;
    for (std::size_t o = 0; o < outer; ++o) {
      double* dst = gx.data() + (o * d + begin) * inner;
      const double* src = n.grad.data() + o * chunk;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
    }
  });
}

Tensor concat(const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat of nothing");
  axis = norm_axis(axis, xs[0].rank());
  Shape out = xs[0].shape();
  out[axis] = 0;
  for (const auto& t : xs) {
    Shape s = t.shape();
    if (s.size() != out.size()) throw ShapeError("concat rank mismatch");
    out[axis] += s[axis];
    s[axis] = out[axis];
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (static_cast<int>(i) != axis && s[i] != out[i]) throw ShapeError("concat shape mismatch");
    }
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out[i];
  for (std::size_t i = axis + 1; i < out.size(); ++i) inner *= out[i];
  std::vector<double> v(numel(out));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  const std::size_t row = static_cast<std::size_t>(out[axis]) * inner;
  for (const auto& t : xs) {
    offsets.push_back(off);
    const std::size_t chunk = static_cast<std::size_t>(t.dim(axis)) * inner;
    const auto tv = t.values();
    for (std::size_t o = 0; o < outer; ++o) std::copy_n(tv.data() + o * chunk, chunk, v.data() + o * row + off);
    off += chunk;
  }
  return make_result(out, std::move(v), xs, [xs, offsets, outer, inner, row, axis](Node& n) {
    for (std::size_t k = 0; k < xs.size(); ++k) {
      if (!xs[k].requires_grad()) continue;
      const std::size_t chunk = static_cast<std::size_t>(xs[k].dim(axis)) * inner;
      auto& g = xs[k].node()->grad;
      for (std::size_t o = 0; o < outer; ++o) {
        const double* src = n.grad.data() + o * row + offsets[k];
        double* dst = g.data() + o * chunk;
        for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return make_result({}, {s}, {x}, [x](Node& n) {
    auto& gx = x.node()->grad;
    const double g = n.grad[0];
    for (auto& v : gx) v += g;
  });
}

Tensor mean(const Tensor& x) { return mul_scalar(sum(x), 1.0 / static_cast<double>(x.size())); }

Tensor sum_axis(const Tensor& x, int axis, bool keepdim) {
  axis = norm_axis(axis, x.rank());
  const int d = x.dim(axis);
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= x.shape()[i];
  for (int i = axis + 1; i < x.rank(); ++i) inner *= x.shape()[i];
  Shape out = x.shape();
  if (keepdim) {
    out[axis] = 1;
  } else {
    out.erase(out.begin() + axis);
  }
  std::vector<double> v(outer * inner, 0.0);
  const auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    for (int k = 0; k < d; ++k) {
      const double* src = xv.data() + (o * d + k) * inner;
      double* dst = v.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  return make_result(out, std::move(v), {x}, [x, outer, inner, d](Node& n) {
    auto& gx = x.node()->grad;
    for (std::size_t o = 0; o < outer; ++o) {
      for (int k = 0; k < d; ++k) {
        double* dst = gx.data() + (o * d + k) * inner;
        const double* src = n.grad.data() + o * inner;
        for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
      }
    }
  });
}

Tensor mean_axis(const Tensor& x, int axis, bool keepdim) {
  const int d = x.dim(axis);
  return mul_scalar(sum_axis(x, axis, keepdim), 1.0 / d);
}

Tensor mse(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("mse: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  return mean(square(sub(a, b)));
}

}  // namespace xsib::nn
