#pragma once

#include <vector>

#include "xsib/nn/tensor.hpp"

namespace xsib::nn {

// Element-wise binary ops with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor atan2(const Tensor& y, const Tensor& x);

Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add_scalar(a, -s); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return mul_scalar(a, -1.0); }

// Element-wise unary ops.
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// log(1 + e^x), computed stably.
Tensor softplus(const Tensor& x);
/// x for x > 0, alpha (e^x - 1) otherwise. C1-continuous at 0 for alpha = 1.
Tensor elu(const Tensor& x, double alpha = 1.0);

/// x[..., k] · w[k, n] -> [..., n].
Tensor matmul(const Tensor& x, const Tensor& w);
/// m[r, k] applied to every [k, n] block of x[..., k, n] -> [..., r, n].
Tensor left_matmul(const Tensor& m, const Tensor& x);
/// x[B, Cin, L] with w[Cout, Cin, K] (odd K, zero "same" padding) and b[Cout].
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& axes);
Tensor slice(const Tensor& x, int axis, int begin, int end);
Tensor concat(const std::vector<Tensor>& xs, int axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor sum_axis(const Tensor& x, int axis, bool keepdim = false);
Tensor mean_axis(const Tensor& x, int axis, bool keepdim = false);

/// mean((a - b)^2) over all elements.
Tensor mse(const Tensor& a, const Tensor& b);

}  // namespace xsib::nn
