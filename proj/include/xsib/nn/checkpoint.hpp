#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xsib/nn/params.hpp"

namespace xsib::nn {

/// Checkpoint layout (little-endian):
///
///   "XSCK"          magic
///   version         u16
///   section_count   u32
///   per section:    u32 name length, name, u64 payload length, payload,
///                   u64 FNV-1a of the payload
///
/// Parameter sections hold, per tensor: u32 name length, name, u32 rank,
/// rank × u32 dims, then the values as f64.
inline constexpr std::uint16_t kCheckpointVersion = 1;

using Bytes = std::vector<std::uint8_t>;

struct Checkpoint {
  std::vector<std::pair<std::string, Bytes>> sections;
  std::string manifest;  // written next to the file as <path>.manifest.txt

  void add(const std::string& name, Bytes payload);
  bool has(const std::string& name) const;
  /// Throws IntegrityError naming the section when it is absent.
  const Bytes& get(const std::string& name) const;
};

Bytes encode_checkpoint(const Checkpoint& ckpt);
/// Parses and verifies every section before returning.
Checkpoint decode_checkpoint(const Bytes& bytes);
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

Bytes encode_params(const ParamStore& store);
/// Copies values into `store`; names and shapes must match exactly.
void decode_params(const Bytes& bytes, ParamStore& store, const std::string& section);
/// One line per tensor: "<section> <name> <d0>x<d1>...".
std::string params_manifest(const std::string& section, const ParamStore& store);

Bytes encode_doubles(const std::vector<std::vector<double>>& arrays);
std::vector<std::vector<double>> decode_doubles(const Bytes& bytes, const std::string& section);

Bytes to_bytes(const std::string& text);
std::string to_text(const Bytes& bytes);

}  // namespace xsib::nn
