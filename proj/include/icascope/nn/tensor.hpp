#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <numeric>
#include <vector>

#include "icascope/errors.hpp"

namespace icascope::nn {

// 64-byte-aligned buffers keep Eigen's vectorized loop peeling, and with it
// every floating-point summation order, independent of where the allocator
// happened to place the data. Bit-reproducible training depends on this.
template <typename T, std::size_t Align>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() noexcept = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}
  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    ::operator delete(p, n * sizeof(T), std::align_val_t(Align));
  }
  bool operator==(const AlignedAllocator&) const { return true; }
  bool operator!=(const AlignedAllocator&) const { return false; }
};

// Dense row-major tensor. The production instantiation is float; tests also
// instantiate double for finite-difference work.
template <typename T>
struct Tensor {
  using Buffer = std::vector<T, AlignedAllocator<T, 64>>;
  std::vector<int> shape;
  Buffer data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<std::size_t>(numel_of(shape)), T(0));
  }

  static long long numel_of(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) n *= d;
    return n;
  }

  long long numel() const { return static_cast<long long>(data.size()); }
  int dim(std::size_t i) const { return shape.at(i); }
  int rank() const { return static_cast<int>(shape.size()); }

  T* ptr() { return data.data(); }
  const T* ptr() const { return data.data(); }

  // Reinterpret without touching data; product of dims must match.
  Tensor reshaped(std::vector<int> s) const {
    if (numel_of(s) != numel()) throw ShapeError("reshape changes element count");
    Tensor t;
    t.shape = std::move(s);
    t.data = data;
    return t;
  }
};

}  // namespace icascope::nn
