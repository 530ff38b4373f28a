#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "alsn/tensor.hpp"

namespace alsn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 5e-4;
  double eps = 1e-8;
};

// A trainable tensor plus its Adam moments. `value.grad` accumulates across
// backward passes until the next optimizer step.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Buffer<T> adam_m;
  Buffer<T> adam_v;
  std::int64_t adam_steps = 0;
};

template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) = default;
  ParameterSet& operator=(ParameterSet&&) = default;

  // Adds a zero-initialized parameter. Names must be unique.
  Parameter<T>& add(const std::string& name, Shape shape);

  Parameter<T>* find(const std::string& name);
  const Parameter<T>* find(const std::string& name) const;
  Parameter<T>& get(const std::string& name);

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  std::deque<Parameter<T>>& items() { return params_; }
  const std::deque<Parameter<T>>& items() const { return params_; }

  void zero_grad();

  // One Adam update with bias correction. Weight decay is added to the
  // gradient before the moment updates. Gradients are zeroed afterwards.
  void adam_step(const AdamOptions& opt);

 private:
  std::deque<Parameter<T>> params_;  // deque keeps references stable
};

extern template struct Parameter<float>;
extern template struct Parameter<double>;
extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace alsn
