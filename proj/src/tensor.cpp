#include "alsn/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace alsn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimension must be positive, got shape " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor(Shape s, Buffer<T> v) : shape(std::move(s)), values(std::move(v)) {
  if (shape_size(shape) != values.size())
    throw std::invalid_argument("tensor shape " + shape_string(shape) + " does not match " +
                                std::to_string(values.size()) + " values");
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : values)
    if (!std::isfinite(v)) return false;
  for (T g : grad)
    if (!std::isfinite(g)) return false;
  return true;
}

template struct Tensor<float>;
template struct Tensor<double>;

}  // namespace alsn
