#include "xsib/nn/params.hpp"

#include <cmath>

#include "xsib/core/errors.hpp"
#include "xsib/nn/ops.hpp"

namespace xsib::nn {

Tensor ParamStore::add(const std::string& name, Shape shape, double std, std::mt19937_64& rng) {
  if (contains(name)) throw ConfigError("duplicate parameter " + name);
  const auto n = numel(shape);
  std::vector<double> v(n, 0.0);
  if (std > 0.0) {
    std::normal_distribution<double> dist(0.0, std);
    for (auto& x : v) x = dist(rng);
  }
  Tensor t(std::move(shape), std::move(v), true);
  names_.push_back(name);
  tensors_.push_back(t);
  return t;
}

Tensor ParamStore::add_constant(const std::string& name, Shape shape, double value) {
  if (contains(name)) throw ConfigError("duplicate parameter " + name);
  const auto n = numel(shape);
  Tensor t(std::move(shape), std::vector<double>(n, value), true);
  names_.push_back(name);
  tensors_.push_back(t);
  return t;
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return tensors_[i];
  }
  throw ConfigError("unknown parameter " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) {
    auto g = const_cast<Tensor&>(t).mutable_grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
}

void ParamStore::set_trainable(bool trainable) {
  for (auto& t : tensors_) t.node()->requires_grad = trainable;
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t ParamStore::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& t : tensors_) h = fnv1a(t.values().data(), t.size() * sizeof(double), h);
  return h;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.names_ != names_) throw ConfigError("parameter layout mismatch");
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (other.tensors_[i].shape() != tensors_[i].shape()) throw ShapeError("parameter shape mismatch: " + names_[i]);
    auto dst = const_cast<Tensor&>(tensors_[i]).mutable_values();
    const auto src = other.tensors_[i].values();
    std::copy(src.begin(), src.end(), dst.begin());
  }
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng, double gain)
    : w(store.add(name + ".w", {in, out}, gain / std::sqrt(static_cast<double>(in)), rng)),
      b(store.add(name + ".b", {out}, 0.0, rng)) {}

Tensor Linear::operator()(const Tensor& x) const { return matmul(x, w) + b; }

Conv1d::Conv1d(ParamStore& store, const std::string& name, int in, int out, int kernel, std::mt19937_64& rng,
               double gain, bool bias)
    : w(store.add(name + ".w", {out, in, kernel}, gain / std::sqrt(static_cast<double>(in * kernel)), rng)),
      b(bias ? store.add(name + ".b", {out}, 0.0, rng) : Tensor::zeros({out})) {}

Tensor Conv1d::operator()(const Tensor& x) const { return conv1d(x, w, b); }

GraphConv::GraphConv(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng)
    : w(store.add(name + ".w", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng)),
      b(store.add(name + ".b", {out}, 0.0, rng)) {}

Tensor GraphConv::operator()(const Tensor& x, const Tensor& adjacency) const {
  return left_matmul(adjacency, matmul(x, w)) + b;
}

}  // namespace xsib::nn
