#include "ntklab/hash.hpp"

#include <cstdio>
#include <cstring>

namespace ntklab {

void Fnv1a::add_bytes(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    state_ ^= bytes[i];
    state_ *= 0x100000001b3ULL;
  }
}

void Fnv1a::add_string(std::string_view s) {
  add_u64(s.size());
  add_bytes(s.data(), s.size());
}

void Fnv1a::add_u64(std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  add_bytes(buf, sizeof buf);
}

void Fnv1a::add_doubles(std::span<const double> values) {
  for (double d : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof bits);
    add_u64(bits);
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace ntklab
