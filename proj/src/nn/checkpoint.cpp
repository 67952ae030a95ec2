#include "xsib/nn/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "xsib/core/bytes.hpp"

namespace xsib::nn {

void Checkpoint::add(const std::string& name, Bytes payload) {
  if (has(name)) throw ConfigError("duplicate checkpoint section " + name);
  sections.emplace_back(name, std::move(payload));
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& s : sections)
    if (s.first == name) return true;
  return false;
}

const Bytes& Checkpoint::get(const std::string& name) const {
  for (const auto& s : sections)
    if (s.first == name) return s.second;
  throw IntegrityError(name, "section missing from checkpoint");
}

Bytes encode_checkpoint(const Checkpoint& ckpt) {
  Bytes out = {'X', 'S', 'C', 'K'};
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint32_t>(ckpt.sections.size()));
  for (const auto& [name, payload] : ckpt.sections) {
    put_le(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le(out, static_cast<std::uint64_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    put_le(out, fnv1a(payload.data(), payload.size()));
  }
  return out;
}

Checkpoint decode_checkpoint(const Bytes& bytes) {
  ByteReader r(bytes);
  const auto* magic = r.take(4, "magic");
  if (std::memcmp(magic, "XSCK", 4) != 0) throw IntegrityError("magic", "not a checkpoint");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw IntegrityError("version", "checkpoint version " + std::to_string(version) + " is not supported");
  }
  const auto count = r.get<std::uint32_t>("section_count");
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string where = "section " + std::to_string(i);
    const auto name_len = r.get<std::uint32_t>(where);
    const auto* name_bytes = r.take(name_len, where);
    const std::string name(name_bytes, name_bytes + name_len);
    const auto len = r.get<std::uint64_t>(name);
    const auto* payload = r.take(len, name);
    const auto sum = r.get<std::uint64_t>(name);
    if (sum != fnv1a(payload, len)) throw IntegrityError(name, "checksum mismatch");
    ckpt.sections.emplace_back(name, Bytes(payload, payload + len));
  }
  if (!r.done()) throw IntegrityError("trailer", "unexpected bytes after the last section");
  return ckpt;
}

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  // Write to a sibling file first so a crash never leaves a half checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw IoError("cannot open " + tmp + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move " + tmp + " to " + path);
  if (!ckpt.manifest.empty()) {
    std::ofstream m(path + ".manifest.txt");
    m << ckpt.manifest;
  }
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  Bytes bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Bytes encode_params(const ParamStore& store) {
  Bytes out;
  put_le(out, static_cast<std::uint32_t>(store.tensors().size()));
  for (std::size_t i = 0; i < store.tensors().size(); ++i) {
    const auto& name = store.names()[i];
    const auto& t = store.tensors()[i];
    put_le(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_le(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put_le(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_le(out, v);
  }
  return out;
}

void decode_params(const Bytes& bytes, ParamStore& store, const std::string& section) {
  ByteReader r(bytes);
  const auto count = r.get<std::uint32_t>(section);
  if (count != store.tensors().size()) {
    throw IntegrityError(section, "holds " + std::to_string(count) + " tensors, model expects " +
                                      std::to_string(store.tensors().size()));
  }
  // Parse everything before touching the store.
  std::vector<std::vector<double>> values;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>(section);
    const auto* nb = r.take(len, section);
    const std::string name(nb, nb + len);
    if (name != store.names()[i]) throw IntegrityError(section, "expected tensor " + store.names()[i] + ", found " + name);
    const auto rank = r.get<std::uint32_t>(section);
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(static_cast<int>(r.get<std::uint32_t>(section)));
    if (shape != store.tensors()[i].shape()) {
      throw IntegrityError(section, name + " has shape " + shape_str(shape) + ", model expects " +
                                        shape_str(store.tensors()[i].shape()));
    }
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = r.get<double>(section);
    values.push_back(std::move(v));
  }
  if (!r.done()) throw IntegrityError(section, "trailing bytes");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = const_cast<Tensor&>(store.tensors()[i]).mutable_values();
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

std::string params_manifest(const std::string& section, const ParamStore& store) {
  std::ostringstream os;
  for (std::size_t i = 0; i < store.names().size(); ++i) {
    os << section << ' ' << store.names()[i] << ' ';
    const auto& s = store.tensors()[i].shape();
    for (std::size_t k = 0; k < s.size(); ++k) os << (k ? "x" : "") << s[k];
    os << '\n';
  }
  return os.str();
}

Bytes encode_doubles(const std::vector<std::vector<double>>& arrays) {
  Bytes out;
  put_le(out, static_cast<std::uint32_t>(arrays.size()));
  for (const auto& a : arrays) {
    put_le(out, static_cast<std::uint64_t>(a.size()));
    for (double v : a) put_le(out, v);
  }
  return out;
}

std::vector<std::vector<double>> decode_doubles(const Bytes& bytes, const std::string& section) {
  ByteReader r(bytes);
  std::vector<std::vector<double>> out(r.get<std::uint32_t>(section));
  for (auto& a : out) {
    a.resize(r.get<std::uint64_t>(section));
    for (auto& v : a) v = r.get<double>(section);
  }
  if (!r.done()) throw IntegrityError(section, "trailing bytes");
  return out;
}

Bytes to_bytes(const std::string& text) { return Bytes(text.begin(), text.end()); }
std::string to_text(const Bytes& bytes) { return std::string(bytes.begin(), bytes.end()); }

}  // namespace xsib::nn
