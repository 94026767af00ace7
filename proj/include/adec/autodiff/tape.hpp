#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "adec/autodiff/tensor.hpp"

namespace adec::ad {

/// Records primitive applications in execution order and replays them in
/// reverse for the gradient. A tape is single-use: a second backward() throws.
///
/// Ops whose inputs do not require a gradient compute their value without
/// recording anything.
template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }
  std::size_t entries_replayed() const { return replayed_; }

  /// Seeds d(loss)=1 and propagates to every reachable requires_grad tensor.
  void backward(const Tensor<T>& loss);

  // -- linear algebra ------------------------------------------------------
  Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> transpose(const Tensor<T>& a);

  // -- elementwise ---------------------------------------------------------
  Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
  Tensor<T> scale(const Tensor<T>& a, T factor);
  Tensor<T> add_bias(const Tensor<T>& a, const Tensor<T>& bias);
  Tensor<T> gelu(const Tensor<T>& a);
  Tensor<T> silu(const Tensor<T>& a);
  Tensor<T> log_floor(const Tensor<T>& a);
  Tensor<T> neg_log_sigmoid(const Tensor<T>& a);

  // -- indexing and layout -------------------------------------------------
  Tensor<T> embedding(const Tensor<T>& table, std::span<const int> ids);
  Tensor<T> slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end);
  Tensor<T> concat_cols(std::span<const Tensor<T>> parts);
  Tensor<T> broadcast_rows(const Tensor<T>& row, std::size_t count);
  Tensor<T> gather(const Tensor<T>& a, std::span<const int> indices);

  // -- normalization and distributions -------------------------------------
  Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       double eps = 1e-5);
  Tensor<T> causal_softmax(const Tensor<T>& scores, double scale);
  Tensor<T> softmax_temp(const Tensor<T>& logits, double tau);
  Tensor<T> log_prob_gather(const Tensor<T>& probs, std::span<const int> indices);
  Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets);

  // -- reductions (accumulate in double) -----------------------------------
  Tensor<T> row_sum(const Tensor<T>& a);
  Tensor<T> sum(const Tensor<T>& a);
  Tensor<T> mean(const Tensor<T>& a);

 private:
  using NodePtr = std::shared_ptr<detail::Node<T>>;
  struct Entry {
    std::vector<NodePtr> inputs;
    NodePtr output;
    std::function<void(detail::Node<T>&)> backward;
  };

  static bool any_requires_grad(std::initializer_list<const Tensor<T>*> inputs);
  Tensor<T> emit(Shape shape, std::vector<T> data, std::vector<NodePtr> inputs,
                 std::function<void(detail::Node<T>&)> backward);

  std::vector<Entry> entries_;
  bool consumed_ = false;
  std::size_t replayed_ = 0;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace adec::ad
