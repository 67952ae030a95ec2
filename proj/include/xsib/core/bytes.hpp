#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "xsib/core/errors.hpp"

namespace xsib {

/// Appends `v` little-endian.
template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

/// Bounds-checked little-endian reader. Running past the end throws an
/// IntegrityError naming the section being read.
class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : ByteReader(bytes.data(), bytes.size()) {}

  template <typename T>
  T get(const std::string& section) {
    need(sizeof(T), section);
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, data_ + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }

  const std::uint8_t* take(std::size_t n, const std::string& section) {
    need(n, section);
    const std::uint8_t* p = data_ + pos_;
    pos_ += n;
    return p;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n, const std::string& section) {
    if (size_ - pos_ < n) {
      throw IntegrityError(section, "truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                                        " more bytes)");
    }
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

}  // namespace xsib
