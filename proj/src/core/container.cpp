#include "xsib/core/container.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "xsib/core/bytes.hpp"
#include "xsib/core/errors.hpp"

namespace xsib {

std::vector<std::uint8_t> encode_f32(std::span<const double> values) {
  std::vector<std::uint8_t> out;
  out.reserve(values.size() * 4);
  for (double v : values) put_le(out, static_cast<float>(v));
  return out;
}

std::vector<double> decode_f32(const std::uint8_t* bytes, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint8_t b[4];
    std::memcpy(b, bytes + 4 * i, 4);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + 4);
    float f;
    std::memcpy(&f, b, 4);
    out[i] = f;
  }
  return out;
}

std::vector<std::uint8_t> encode_container(const Dataset& d) {
  d.skeleton.validate();
  std::vector<std::uint8_t> out = {'X', 'S', 'I', 'B'};
  put_le(out, kContainerVersion);
  nlohmann::json header;
  header["skeleton"] = d.skeleton;
  header["frame_rate"] = d.frame_rate;
  header["sequence_meta"] = d.meta;
  const std::string text = header.dump();
  put_le(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  put_le(out, static_cast<std::uint32_t>(d.sequences.size()));
  for (const auto& s : d.sequences) {
    if (s.joints() != d.skeleton.joint_count()) throw ShapeError("sequence joint count differs from skeleton");
    put_le(out, static_cast<std::uint32_t>(s.frames()));
    const auto payload = encode_f32(s.data());
    out.insert(out.end(), payload.begin(), payload.end());
  }
  return out;
}

Dataset decode_container(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  const std::uint8_t* magic = r.take(4, "magic");
  if (std::memcmp(magic, "XSIB", 4) != 0) throw IntegrityError("magic", "not an XSIB container");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kContainerVersion) {
    throw IntegrityError("version", "unsupported container version " + std::to_string(version));
  }
  const auto header_len = r.get<std::uint32_t>("header");
  const std::uint8_t* header_bytes = r.take(header_len, "header");
  Dataset d;
  try {
    const auto header = nlohmann::json::parse(header_bytes, header_bytes + header_len);
    d.skeleton = header.at("skeleton").get<SkeletonSpec>();
    d.frame_rate = header.value("frame_rate", 30.0);
    if (header.contains("sequence_meta")) {
      for (const auto& m : header.at("sequence_meta")) d.meta.push_back(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("header", e.what());
  }
  try {
    d.skeleton.validate();
  } catch (const ConfigError& e) {
    throw IntegrityError("skeleton", e.what());
  }
  const int J = d.skeleton.joint_count();
  const auto count = r.get<std::uint32_t>("sequence_count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string section = "sequence " + std::to_string(i);
    const auto frames = r.get<std::uint32_t>(section.c_str());
    MotionWindow w(static_cast<int>(frames), J, 0, d.frame_rate);
    const std::size_t n = w.data().size();
    const std::uint8_t* payload = r.take(n * 4, section.c_str());
    const auto values = decode_f32(payload, n);
    std::copy(values.begin(), values.end(), w.data().begin());
    d.sequences.push_back(std::move(w));
  }
  if (!r.done()) throw IntegrityError("trailer", "unexpected bytes after last sequence at " + std::to_string(r.pos()));
  if (!d.meta.empty() && d.meta.size() != d.sequences.size()) {
    throw IntegrityError("header", "sequence_meta count differs from sequence count");
  }
  return d;
}

void write_container(const std::string& path, const Dataset& d) {
  const auto bytes = encode_container(d);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path, static_cast<long long>(f.tellp()));
}

Dataset read_container(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_container(bytes);
  } catch (const IntegrityError& e) {
    throw IntegrityError(e.section(), path + ": " + e.what());
  }
}

}  // namespace xsib
