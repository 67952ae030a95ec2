#include "xsib/interaction/pjd.hpp"

#include <sstream>

#include "xsib/core/errors.hpp"

namespace xsib::interaction {

PjdDynamics compute_pjd(const MotionWindow& world, const std::vector<JointPair>& pairs, int horizon, int start) {
  if (horizon < 1 || start < 0 || start + horizon + 1 > world.frames()) {
    throw HorizonError("PJD over " + std::to_string(horizon) + " frames from " + std::to_string(start) +
                       " needs " + std::to_string(start + horizon + 1) + " frames, window has " +
                       std::to_string(world.frames()));
  }
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= world.joints() || j >= world.joints()) throw RangeError("PJD pair out of range");
  }
  PjdDynamics d;
  d.horizon = horizon;
  d.pairs = pairs;
  d.offsets.resize(pairs.size() * horizon);
  auto sq = [&](int f, int i, int j) { return (world.position(f, 0, i) - world.position(f, 1, j)).squaredNorm(); };
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    double prev = sq(start, pairs[p].first, pairs[p].second);
    for (int n = 0; n < horizon; ++n) {
      const double cur = sq(start + n + 1, pairs[p].first, pairs[p].second);
      d.offsets[p * horizon + n] = cur - prev;
      prev = cur;
    }
  }
  return d;
}

Tensor pjd_tensor(const Tensor& a, const Tensor& b, const std::vector<JointPair>& pairs) {
  if (a.rank() != 4 || a.shape() != b.shape() || a.dim(3) != kChannels || a.dim(1) < 2) {
    throw ShapeError("pjd_tensor expects matching [B, F >= 2, J, 9] inputs");
  }
  const int B = a.dim(0), F = a.dim(1), J = a.dim(2), P = static_cast<int>(pairs.size());
  for (const auto& [i, j] : pairs) {
    if (i < 0 || j < 0 || i >= J || j >= J) throw RangeError("PJD pair out of range");
  }
  auto at = [J, F](int bb, int f, int j) { return ((static_cast<std::size_t>(bb) * F + f) * J + j) * kChannels; };
  const auto av = a.values(), bv = b.values();
  // Squared distance per (b, p, f) first, then differences.
  std::vector<double> d(static_cast<std::size_t>(B) * P * F);
  for (int bb = 0; bb < B; ++bb)
    for (int p = 0; p < P; ++p)
      for (int f = 0; f < F; ++f) {
        const double* x = av.data() + at(bb, f, pairs[p].first);
        const double* y = bv.data() + at(bb, f, pairs[p].second);
        d[(static_cast<std::size_t>(bb) * P + p) * F + f] =
            (x[0] - y[0]) * (x[0] - y[0]) + (x[1] - y[1]) * (x[1] - y[1]) + (x[2] - y[2]) * (x[2] - y[2]);
      }
  std::vector<double> out(static_cast<std::size_t>(B) * P * (F - 1));
  for (std::size_t r = 0; r < static_cast<std::size_t>(B) * P; ++r)
    for (int n = 0; n < F - 1; ++n) out[r * (F - 1) + n] = d[r * F + n + 1] - d[r * F + n];

  return nn::make_result({B, P, F - 1}, std::move(out), {a, b}, [a, b, pairs, B, F, P, at](nn::Node& node) {
    const auto av = a.values(), bv = b.values();
    nn::Node* na = a.node();
    nn::Node* nb = b.node();
    for (int bb = 0; bb < B; ++bb)
      for (int p = 0; p < P; ++p) {
        const double* g = node.grad.data() + (static_cast<std::size_t>(bb) * P + p) * (F - 1);
        for (int f = 0; f < F; ++f) {
          // d_f enters offset f-1 with +1 and offset f with -1.
          const double gd = (f > 0 ? g[f - 1] : 0.0) - (f < F - 1 ? g[f] : 0.0);
          if (gd == 0.0) continue;
          const std::size_t ia = at(bb, f, pairs[p].first), ib = at(bb, f, pairs[p].second);
          for (int k = 0; k < 3; ++k) {
            const double diff = 2.0 * gd * (av[ia + k] - bv[ib + k]);
            if (na->requires_grad) na->grad[ia + k] += diff;
            if (nb->requires_grad) nb->grad[ib + k] -= diff;
          }
        }
      }
  });
}

Tensor stack_pjd(const std::vector<PjdDynamics>& batch) {
  if (batch.empty()) throw ShapeError("empty PJD batch");
  const int P = static_cast<int>(batch[0].pairs.size()), N = batch[0].horizon;
  std::vector<double> v;
  v.reserve(batch.size() * P * N);
  for (const auto& d : batch) {
    if (d.horizon != N || static_cast<int>(d.pairs.size()) != P) throw ShapeError("ragged PJD batch");
    v.insert(v.end(), d.offsets.begin(), d.offsets.end());
  }
  return Tensor({static_cast<int>(batch.size()), P, N}, std::move(v));
}

std::string pjd_csv(const PjdDynamics& d) {
  std::ostringstream os;
  os.precision(9);
  os << "i,j";
  for (int n = 0; n < d.horizon; ++n) os << ",d" << n;
  os << '\n';
  for (std::size_t p = 0; p < d.pairs.size(); ++p) {
    os << d.pairs[p].first << ',' << d.pairs[p].second;
    for (int n = 0; n < d.horizon; ++n) os << ',' << d.at(static_cast<int>(p), n);
    os << '\n';
  }
  return os.str();
}

}  // namespace xsib::interaction
