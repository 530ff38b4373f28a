#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <string>
#include <vector>

namespace alsn {

// Every buffer starts on a 64-byte boundary, so vectorized kernels split
// their loops the same way on every run.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using Buffer = std::vector<T, AlignedAllocator<T>>;

using Shape = std::vector<int>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major array. Feature maps are C x H x W, kernels are
// Cout x Cin x k x k. `grad` is either empty or the same length as `values`.
template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> values;
  Buffer<T> grad;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), values(shape_size(shape), fill) {}
  Tensor(Shape s, Buffer<T> v);
  Tensor(Shape s, const std::vector<T>& v) : Tensor(std::move(s), Buffer<T>(v.begin(), v.end())) {}
  Tensor(Shape s, std::initializer_list<T> v) : Tensor(std::move(s), Buffer<T>(v)) {}

  std::size_t size() const { return values.size(); }
  int rank() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

  // CHW accessors.
  int channels() const { return shape[0]; }
  int height() const { return shape[1]; }
  int width() const { return shape[2]; }
  T& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }
  const T& at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
  }

  bool has_grad() const { return !grad.empty(); }
  void zero_grad() { grad.assign(values.size(), T(0)); }
  bool all_finite() const;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.values.assign(values.begin(), values.end());
    return out;
  }
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;

}  // namespace alsn
