#ifndef FNET_OPTIMIZE_HPP
#define FNET_OPTIMIZE_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fnet/autodiff.hpp"
#include "fnet/tensor.hpp"

namespace fnet {

// Exponential step decay: base_lr * decay^floor(step / decay_interval) in
// staircase mode, base_lr * decay^(step / decay_interval) otherwise.
struct LrSchedule {
  double base_lr = 1e-4;
  double decay = 0.99;
  int decay_interval = 100;
  bool staircase = true;
};

inline double lr_at(std::int64_t step, const LrSchedule& sched) {
  if (sched.base_lr <= 0 || sched.decay <= 0 || sched.decay > 1 ||
      sched.decay_interval < 1) {
    throw std::invalid_argument("lr_at: invalid schedule");
  }
  const double e = sched.staircase
                       ? static_cast<double>(step / sched.decay_interval)
                       : static_cast<double>(step) / sched.decay_interval;
  return sched.base_lr * std::pow(sched.decay, e);
}

// Adam with the standard defaults; the moment buffers are kept aligned with
// the parameter list handed to adam_step.
template <typename Scalar>
struct AdamState {
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;
  std::int64_t t = 0;
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar eps = Scalar(1e-8);
};

template <typename Scalar>
void adam_step(const std::vector<Tensor<Scalar>*>& params,
               const std::vector<const Tensor<Scalar>*>& grads,
               AdamState<Scalar>& state, Scalar lr) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: params/grads size mismatch");
  }
  if (state.m.empty()) {
    state.m.reserve(params.size());
    state.v.reserve(params.size());
    for (const auto* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state does not match params");
  }
  state.t += 1;
  const Scalar bc1 = Scalar(1) - std::pow(state.beta1, Scalar(state.t));
  const Scalar bc2 = Scalar(1) - std::pow(state.beta2, Scalar(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->array();
    const auto& g = grads[i]->array();
    auto& m = state.m[i].array();
    auto& v = state.v[i].array();
    m = state.beta1 * m + (Scalar(1) - state.beta1) * g;
    v = state.beta2 * v + (Scalar(1) - state.beta2) * g.square();
    p -= lr * (m / bc1) / ((v / bc2).sqrt() + state.eps);
  }
}

// Uniform Kaiming-style init: U(-b, b) with b = sqrt(6 / fan_in).
template <typename Scalar>
Tensor<Scalar> kaiming_uniform(std::vector<int> shape, int fan_in,
                               std::mt19937_64& rng) {
  Tensor<Scalar> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (std::int64_t i = 0; i < t.numel(); ++i) {
    t[i] = static_cast<Scalar>(dist(rng));
  }
  return t;
}

// Named parameters in creation order. Creation order doubles as the
// serialization and optimizer order, so runs are reproducible.
template <typename Scalar>
class ParamStore {
 public:
  // Var is a shared handle, so these return copies; the underlying parameter
  // tensor is shared with the store.
  Var<Scalar> create(const std::string& name, Tensor<Scalar> init) {
    if (index_.count(name)) {
      throw std::invalid_argument("duplicate parameter name: " + name);
    }
    index_[name] = names_.size();
    names_.push_back(name);
    vars_.push_back(Var<Scalar>::parameter(std::move(init)));
    return vars_.back();
  }

  Var<Scalar> at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) {
      throw std::out_of_range("unknown parameter: " + name);
    }
    return vars_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t size() const { return vars_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Var<Scalar> var(std::size_t i) const { return vars_[i]; }

  void zero_grad() {
    for (auto& v : vars_) v.zero_grad();
  }

  std::int64_t total_params() const {
    std::int64_t n = 0;
    for (const auto& v : vars_) n += v.value().numel();
    return n;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Var<Scalar>> vars_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace fnet

#endif  // FNET_OPTIMIZE_HPP
