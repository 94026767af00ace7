#include "adec/autodiff/params.hpp"

#include <cmath>
#include <cstring>

#include "adec/errors.hpp"

namespace adec::ad {

template <class T>
const Tensor<T>& Bound<T>::operator[](const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw ContractError("no bound parameter named '" + name + "'");
  return it->second;
}

void ParamSet::add(const std::string& name, Shape shape, std::vector<float> data) {
  if (numel(shape) != data.size()) {
    throw DimensionError("parameter '" + name + "' has shape " + to_string(shape) + " but " +
                         std::to_string(data.size()) + " values");
  }
  if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  params_.emplace(name, Param{std::move(shape), std::move(data)});
}

const Param& ParamSet::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

Param& ParamSet::get_mut(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

std::size_t ParamSet::total_size() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.data.size();
  return n;
}

bool ParamSet::bit_equal(const ParamSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (const auto& [name, p] : params_) {
    auto it = other.params_.find(name);
    if (it == other.params_.end() || it->second.shape != p.shape) return false;
    if (std::memcmp(p.data.data(), it->second.data.data(), p.data.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

template <class T>
Bound<T> ParamSet::bind(bool requires_grad) const {
  Bound<T> b;
  for (const auto& [name, p] : params_) {
    b.put(name, Tensor<T>(p.shape, std::vector<T>(p.data.begin(), p.data.end()), requires_grad));
  }
  return b;
}

GradAccum::GradAccum(const ParamSet& params) {
  for (const auto& [name, p] : params.all()) grads_[name].assign(p.data.size(), 0.0);
}

template <class T>
void GradAccum::add(const Bound<T>& bound, double scale) {
  for (auto& [name, g] : grads_) {
    const auto& t = bound[name];
    if (!t.has_grad()) continue;
    const auto src = t.grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * static_cast<double>(src[i]);
  }
}

void GradAccum::add(const GradAccum& other) {
  for (auto& [name, g] : grads_) {
    const auto& src = other[name];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += src[i];
  }
}

void GradAccum::scale(double s) {
  for (auto& [_, g] : grads_)
    for (auto& v : g) v *= s;
}

const std::vector<double>& GradAccum::operator[](const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ContractError("no gradient slot for '" + name + "'");
  return it->second;
}

double GradAccum::l2_norm() const {
  double s = 0;
  for (const auto& [_, g] : grads_)
    for (double v : g) s += v * v;
  return std::sqrt(s);
}

void Adam::step(ParamSet& params, const GradAccum& grads, double lr_scale) {
  ++t_;
  double clip = 1.0;
  if (cfg_.clip_norm > 0) {
    const double norm = grads.l2_norm();
    if (norm > cfg_.clip_norm) clip = cfg_.clip_norm / norm;
  }
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double lr = cfg_.lr * lr_scale;
  for (const auto& [name, g] : grads.all()) {
    auto& p = params.get_mut(name);
    auto& m = m_[name];
    auto& v = v_[name];
    if (m.empty()) {
      m.assign(g.size(), 0.0);
      v.assign(g.size(), 0.0);
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i] * clip;
      if (!std::isfinite(gi)) throw NumericError("non-finite gradient for '" + name + "'");
      m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * gi;
      v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double w = p.data[i];
      if (cfg_.weight_decay > 0 && p.shape.size() == 2) w -= lr * cfg_.weight_decay * w;
      w -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      p.data[i] = static_cast<float>(w);
    }
  }
}

template class Bound<float>;
template class Bound<double>;
template Bound<float> ParamSet::bind<float>(bool) const;
template Bound<double> ParamSet::bind<double>(bool) const;
template void GradAccum::add<float>(const Bound<float>&, double);
template void GradAccum::add<double>(const Bound<double>&, double);

}  // namespace adec::ad
