#include "adec/autodiff/tensor.hpp"

#include <numeric>
#include <sstream>

#include "adec/errors.hpp"

namespace adec::ad {

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + to_string(shape));
  }
  if (shape.empty()) throw DimensionError("tensor needs at least one dimension");
  if (numel(shape) != data.size()) {
    throw DimensionError("shape " + to_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  node_ = std::make_shared<detail::Node<T>>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <class T>
detail::Node<T>& Tensor<T>::node() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

template <class T>
const Shape& Tensor<T>::shape() const {
  return node().shape;
}

template <class T>
std::size_t Tensor<T>::dim(std::size_t i) const {
  const auto& s = shape();
  if (i >= s.size()) throw DimensionError("dimension index out of range");
  return s[i];
}

template <class T>
std::size_t Tensor<T>::size() const {
  return node().data.size();
}

template <class T>
std::size_t Tensor<T>::rows() const {
  const auto& s = shape();
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw DimensionError("matrix view needs a 1-D or 2-D tensor, got " + to_string(s));
}

template <class T>
std::size_t Tensor<T>::cols() const {
  const auto& s = shape();
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw DimensionError("matrix view needs a 1-D or 2-D tensor, got " + to_string(s));
}

template <class T>
std::span<const T> Tensor<T>::data() const {
  return node().data;
}

template <class T>
T Tensor<T>::item() const {
  if (size() != 1) throw ContractError("item() on a tensor of shape " + to_string(shape()));
  return node().data[0];
}

template <class T>
bool Tensor<T>::requires_grad() const {
  return node().requires_grad;
}

template <class T>
bool Tensor<T>::has_grad() const {
  return !node().grad.empty();
}

template <class T>
std::span<const T> Tensor<T>::grad() const {
  if (!has_grad()) throw ContractError("tensor has no gradient");
  return node().grad;
}

template <class T>
void Tensor<T>::zero_grad() {
  node().grad.clear();
}

template <class T>
bool Tensor<T>::is_leaf() const {
  return node().owner == nullptr;
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace adec::ad
