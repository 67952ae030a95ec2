#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xsib/core/motion.hpp"

namespace xsib {

/// Motion container layout (all integers and floats little-endian):
///
///   "XSIB"            4 bytes magic
///   version           u16 (kContainerVersion)
///   header_length     u32
///   header            UTF-8 JSON: {"skeleton", "frame_rate", "sequence_meta"}
///   sequence_count    u32
///   per sequence:     frame_count u32, then frame_count×2×J×9 f32,
///                     frame-major, character-major within a frame
inline constexpr std::uint16_t kContainerVersion = 1;

std::vector<std::uint8_t> encode_container(const Dataset& dataset);
Dataset decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::string& path, const Dataset& dataset);
Dataset read_container(const std::string& path);

/// Little-endian f32 encoding of raw values, shared with the streaming API.
std::vector<std::uint8_t> encode_f32(std::span<const double> values);
std::vector<double> decode_f32(const std::uint8_t* bytes, std::size_t count);

}  // namespace xsib
