#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace adec::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Floor applied inside every log of a probability.
inline constexpr double kProbFloor = 1e-8;

template <class T>
class Tape;

namespace detail {

template <class T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  const void* owner = nullptr;  // producing tape; null for leaves

  T* grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad.data();
  }
};

}  // namespace detail

/// Dense row-major tensor handle. Copies share storage; data is immutable
/// once constructed, only the gradient buffer accumulates.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t size() const;
  // Matrix view: a 1-D tensor of length n is a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const T> data() const;
  T item() const;
  T operator[](std::size_t flat) const { return data()[flat]; }
  T at(std::size_t r, std::size_t c) const { return data()[r * cols() + c]; }

  bool requires_grad() const;
  bool has_grad() const;
  std::span<const T> grad() const;
  void zero_grad();
  bool is_leaf() const;

 private:
  friend class Tape<T>;
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}
  detail::Node<T>& node() const;

  std::shared_ptr<detail::Node<T>> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace adec::ad
