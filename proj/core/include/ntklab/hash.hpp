#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace ntklab {

/// 64-bit FNV-1a, used for config and probe-set fingerprints in run.meta.
class Fnv1a {
 public:
  void add_bytes(const void* data, std::size_t size);
  void add_string(std::string_view s);
  void add_u64(std::uint64_t v);
  void add_doubles(std::span<const double> values);
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hex64(std::uint64_t v);

}  // namespace ntklab
