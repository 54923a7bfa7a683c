#pragma once

#include <cstddef>
#include <new>
#include <vector>

namespace ntklab {

/// Every buffer handed to Eigen starts on a 64-byte boundary, so vectorized reductions peel
/// the same leading elements no matter where the heap placed the allocation.
inline constexpr std::size_t kBufferAlignment = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kBufferAlignment}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kBufferAlignment}); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
    return true;
  }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

}  // namespace ntklab
