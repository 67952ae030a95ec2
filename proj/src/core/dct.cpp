#include "xsib/core/dct.hpp"

#include <cmath>
#include <numbers>

#include "xsib/core/errors.hpp"

namespace xsib {

std::vector<double> dct_basis(int K, int T) {
  if (T <= 0 || K <= 0 || K > T) throw ShapeError("dct basis needs 1 <= K <= T");
  std::vector<double> b(static_cast<std::size_t>(K) * T);
  const double s0 = std::sqrt(1.0 / T), s = std::sqrt(2.0 / T);
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < T; ++n) {
      b[k * T + n] = (k == 0 ? s0 : s) * std::cos(std::numbers::pi * (n + 0.5) * k / T);
    }
  }
  return b;
}

DctSpectrum dct_forward(const MotionWindow& window, int K) {
  const int T = window.frames();
  if (K < 1 || K > T) {
    throw ShapeError("dct_forward: K=" + std::to_string(K) + " outside [1, " + std::to_string(T) + "]");
  }
  window.require_finite("dct_forward");
  const auto basis = dct_basis(K, T);
  DctSpectrum out;
  out.K = K;
  out.joints = window.joints();
  const std::size_t vpf = window.values_per_frame();
  out.coefficients.assign(K * vpf, 0.0);
  const auto x = window.data();
  for (int k = 0; k < K; ++k) {
    double* dst = out.coefficients.data() + k * vpf;
    for (int n = 0; n < T; ++n) {
      const double w = basis[k * T + n];
      const double* src = x.data() + n * vpf;
      for (std::size_t i = 0; i < vpf; ++i) dst[i] += w * src[i];
    }
  }
  return out;
}

MotionWindow idct_inverse(const DctSpectrum& spectrum, int T) {
  if (spectrum.K > T) {
    throw ShapeError("idct_inverse: K=" + std::to_string(spectrum.K) + " exceeds T=" + std::to_string(T));
  }
  const auto basis = dct_basis(T, T);
  MotionWindow out(T, spectrum.joints);
  const std::size_t vpf = out.values_per_frame();
  auto y = out.data();
  for (int n = 0; n < T; ++n) {
    double* dst = y.data() + n * vpf;
    for (int k = 0; k < spectrum.K; ++k) {
      const double w = basis[k * T + n];
      const double* src = spectrum.coefficients.data() + k * vpf;
      for (std::size_t i = 0; i < vpf; ++i) dst[i] += w * src[i];
    }
  }
  return out;
}

std::vector<double> dct_1d(const std::vector<double>& x, int K) {
  const int T = static_cast<int>(x.size());
  const auto b = dct_basis(K, T);
  std::vector<double> out(K, 0.0);
  for (int k = 0; k < K; ++k) {
    for (int n = 0; n < T; ++n) out[k] += b[k * T + n] * x[n];
  }
  return out;
}

std::vector<double> idct_1d(const std::vector<double>& c, int T) {
  const int K = static_cast<int>(c.size());
  if (K > T) throw ShapeError("idct_1d: K exceeds T");
  const auto b = dct_basis(T, T);
  std::vector<double> out(T, 0.0);
  for (int n = 0; n < T; ++n) {
    for (int k = 0; k < K; ++k) out[n] += b[k * T + n] * c[k];
  }
  return out;
}

}  // namespace xsib
