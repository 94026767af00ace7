#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "adec/autodiff/tensor.hpp"

namespace adec::ad {

/// One named parameter, stored in 32-bit.
struct Param {
  Shape shape;
  std::vector<float> data;
};

/// Tensors bound from a ParamSet for one forward pass.
template <class T>
class Bound {
 public:
  const Tensor<T>& operator[](const std::string& name) const;
  const std::map<std::string, Tensor<T>>& all() const { return tensors_; }
  void put(const std::string& name, Tensor<T> t) { tensors_[name] = std::move(t); }

 private:
  std::map<std::string, Tensor<T>> tensors_;
};

/// Named parameter storage, ordered by name.
class ParamSet {
 public:
  void add(const std::string& name, Shape shape, std::vector<float> data);
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const Param& get(const std::string& name) const;
  Param& get_mut(const std::string& name);
  const std::map<std::string, Param>& all() const { return params_; }
  std::size_t total_size() const;
  bool bit_equal(const ParamSet& other) const;

  template <class T>
  Bound<T> bind(bool requires_grad) const;

 private:
  std::map<std::string, Param> params_;
};

/// Gradient sums in 64-bit, keyed by parameter name.
class GradAccum {
 public:
  explicit GradAccum(const ParamSet& params);
  template <class T>
  void add(const Bound<T>& bound, double scale = 1.0);
  void add(const GradAccum& other);
  void scale(double s);
  const std::vector<double>& operator[](const std::string& name) const;
  const std::map<std::string, std::vector<double>>& all() const { return grads_; }
  double l2_norm() const;

 private:
  std::map<std::string, std::vector<double>> grads_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;   // decoupled
  double clip_norm = 0.0;      // 0 disables global-norm clipping
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  void step(ParamSet& params, const GradAccum& grads, double lr_scale = 1.0);
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace adec::ad
