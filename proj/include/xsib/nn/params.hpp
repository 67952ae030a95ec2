#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "xsib/nn/tensor.hpp"

namespace xsib::nn {

/// Ordered set of named trainable tensors. Names are stable and used as
/// checkpoint keys, so a module registers its weights under a fixed prefix.
class ParamStore {
 public:
  /// Normal(0, std) initialization; std <= 0 gives zeros.
  Tensor add(const std::string& name, Shape shape, double std, std::mt19937_64& rng);
  Tensor add_constant(const std::string& name, Shape shape, double value);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::size_t parameter_count() const;

  void zero_grad();
  /// Frozen tensors stop recording gradients; ops on them become constants.
  void set_trainable(bool trainable);
  /// FNV-1a over the raw bytes of every value, in registration order.
  std::uint64_t hash() const;
  /// Copies values (not the graph) from another store with the same layout.
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 1469598103934665603ull);

struct Linear {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng, double gain = 1.0);
  Tensor operator()(const Tensor& x) const;
};

struct Conv1d {
  Tensor w;  // [out, in, k]
  Tensor b;  // [out]
  Conv1d() = default;
  /// Without `bias` the offset is a fixed zero that is not registered.
  Conv1d(ParamStore& store, const std::string& name, int in, int out, int kernel, std::mt19937_64& rng,
         double gain = 1.0, bool bias = true);
  Tensor operator()(const Tensor& x) const;
};

/// x[..., J, in] -> A · x · W + b over the joint axis.
struct GraphConv {
  Tensor w;  // [in, out]
  Tensor b;  // [out]
  GraphConv() = default;
  GraphConv(ParamStore& store, const std::string& name, int in, int out, std::mt19937_64& rng);
  Tensor operator()(const Tensor& x, const Tensor& adjacency) const;
};

}  // namespace xsib::nn
