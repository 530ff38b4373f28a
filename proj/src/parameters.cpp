#include "alsn/parameters.hpp"

#include <cmath>
#include <stdexcept>

namespace alsn {

template <typename T>
Parameter<T>& ParameterSet<T>::add(const std::string& name, Shape shape) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Parameter<T>& p = params_.emplace_back();
  p.name = name;
  p.value = Tensor<T>(std::move(shape));
  p.value.zero_grad();
  p.adam_m.assign(p.value.size(), T(0));
  p.adam_v.assign(p.value.size(), T(0));
  return p;
}

template <typename T>
Parameter<T>* ParameterSet<T>::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
Parameter<T>& ParameterSet<T>::get(const std::string& name) {
  Parameter<T>* p = find(name);
  if (!p) throw std::out_of_range("no parameter named " + name);
  return *p;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

template <typename T>
void ParameterSet<T>::adam_step(const AdamOptions& opt) {
  if (!(opt.lr > 0)) throw std::invalid_argument("adam_step: learning rate must be positive");
  const T b1 = static_cast<T>(opt.beta1);
  const T b2 = static_cast<T>(opt.beta2);
  const T wd = static_cast<T>(opt.weight_decay);
  const T eps = static_cast<T>(opt.eps);
  for (auto& p : params_) {
    ++p.adam_steps;
    const T c1 = static_cast<T>(1.0 - std::pow(opt.beta1, static_cast<double>(p.adam_steps)));
    const T c2 = static_cast<T>(1.0 - std::pow(opt.beta2, static_cast<double>(p.adam_steps)));
    const T lr = static_cast<T>(opt.lr);
    auto& w = p.value.values;
    auto& g = p.value.grad;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const T gi = g[i] + wd * w[i];
      p.adam_m[i] = b1 * p.adam_m[i] + (T(1) - b1) * gi;
      p.adam_v[i] = b2 * p.adam_v[i] + (T(1) - b2) * gi * gi;
      const T mhat = p.adam_m[i] / c1;
      const T vhat = p.adam_v[i] / c2;
      w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      g[i] = T(0);
    }
  }
}

template struct Parameter<float>;
template struct Parameter<double>;
template class ParameterSet<float>;
template class ParameterSet<double>;

}  // namespace alsn
