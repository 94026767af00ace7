#include "adec/autodiff/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "adec/errors.hpp"

namespace adec::ad {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapC = Eigen::Map<const RowMat<T>>;
template <class T>
using Map = Eigen::Map<RowMat<T>>;

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " +
                         to_string(b));
  }
}

void require_finite_check(bool ok, const char* op) {
  if (!ok) throw NumericError(std::string(op) + ": non-finite input");
}

template <class T>
double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

template <class T>
bool Tape<T>::any_requires_grad(std::initializer_list<const Tensor<T>*> inputs) {
  for (const auto* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

template <class T>
Tensor<T> Tape<T>::emit(Shape shape, std::vector<T> data, std::vector<NodePtr> inputs,
                        std::function<void(detail::Node<T>&)> backward) {
  if (consumed_) throw ContractError("tape already consumed by backward()");
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->owner = this;
  node->requires_grad = static_cast<bool>(backward);
  if (backward) {
    entries_.push_back(Entry{std::move(inputs), node, std::move(backward)});
  }
  return Tensor<T>(node);
}

template <class T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw ContractError("backward() called twice on the same tape");
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  consumed_ = true;
  if (!loss.requires_grad()) return;
  loss.node().grad_buffer()[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    ++replayed_;
    if (!it->output->grad.empty()) it->backward(*it->output);
    it->backward = nullptr;
  }
}

// ---------------------------------------------------------------------------

template <class T>
Tensor<T> Tape<T>::matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() > 2 || b.ndim() != 2) throw DimensionError("matmul needs 2-D operands");
  const std::size_t m = a.rows(), k = a.cols(), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  std::vector<T> out(m * n);
  Map<T>(out.data(), m, n).noalias() = MapC<T>(a.data().data(), m, k) * MapC<T>(b.data().data(), k, n);
  std::function<void(detail::Node<T>&)> bw;
  if (any_requires_grad({&a, &b})) {
    bw = [an = a.node_, bn = b.node_, m, k, n](detail::Node<T>& o) {
      MapC<T> g(o.grad.data(), m, n);
      if (an->requires_grad) {
        Map<T>(an->grad_buffer(), m, k).noalias() += g * MapC<T>(bn->data.data(), k, n).transpose();
      }
      if (bn->requires_grad) {
        Map<T>(bn->grad_buffer(), k, n).noalias() += MapC<T>(an->data.data(), m, k).transpose() * g;
      }
    };
  }
  return emit({m, n}, std::move(out), {a.node_, b.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::transpose(const Tensor<T>& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<T> out(m * n);
  Map<T>(out.data(), n, m) = MapC<T>(a.data().data(), m, n).transpose();
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_, m, n](detail::Node<T>& o) {
      Map<T>(an->grad_buffer(), m, n) += MapC<T>(o.grad.data(), n, m).transpose();
    };
  }
  return emit({n, m}, std::move(out), {a.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  std::function<void(detail::Node<T>&)> bw;
  if (any_requires_grad({&a, &b})) {
    bw = [an = a.node_, bn = b.node_](detail::Node<T>& o) {
      for (auto* in : {an.get(), bn.get()}) {
        if (!in->requires_grad) continue;
        T* g = in->grad_buffer();
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
      }
    };
  }
  return emit(a.shape(), std::move(out), {a.node_, b.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  std::function<void(detail::Node<T>&)> bw;
  if (any_requires_grad({&a, &b})) {
    bw = [an = a.node_, bn = b.node_](detail::Node<T>& o) {
      if (an->requires_grad) {
        T* g = an->grad_buffer();
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
      }
      if (bn->requires_grad) {
        T* g = bn->grad_buffer();
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
      }
    };
  }
  return emit(a.shape(), std::move(out), {a.node_, b.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  std::function<void(detail::Node<T>&)> bw;
  if (any_requires_grad({&a, &b})) {
    bw = [an = a.node_, bn = b.node_](detail::Node<T>& o) {
      if (an->requires_grad) {
        T* g = an->grad_buffer();
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * bn->data[i];
      }
      if (bn->requires_grad) {
        T* g = bn->grad_buffer();
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * an->data[i];
      }
    };
  }
  return emit(a.shape(), std::move(out), {a.node_, b.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_, factor](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * factor;
    };
  }
  return emit(a.shape(), std::move(out), {a.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::add_bias(const Tensor<T>& a, const Tensor<T>& bias) {
  const std::size_t m = a.rows(), n = a.cols();
  if (bias.size() != n) throw DimensionError("add_bias: bias width does not match columns");
  std::vector<T> out(a.size());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = a[r * n + c] + bias[c];
  std::function<void(detail::Node<T>&)> bw;
  if (any_requires_grad({&a, &bias})) {
    bw = [an = a.node_, bn = bias.node_, m, n](detail::Node<T>& o) {
      if (an->requires_grad) {
        T* g = an->grad_buffer();
        for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
      }
      if (bn->requires_grad) {
        T* g = bn->grad_buffer();
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < n; ++c) g[c] += o.grad[r * n + c];
      }
    };
  }
  return emit(a.shape(), std::move(out), {a.node_, bias.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::gelu(const Tensor<T>& a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a[i];
    out[i] = static_cast<T>(0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x))));
  }
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const double x = an->data[i];
        const double u = k * (x + 0.044715 * x * x * x);
        const double th = std::tanh(u);
        const double du = k * (1.0 + 3.0 * 0.044715 * x * x);
        const double d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
        g[i] += static_cast<T>(o.grad[i] * d);
      }
    };
  }
  return emit(a.shape(), std::move(out), {a.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::silu(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a[i];
    out[i] = static_cast<T>(x * stable_sigmoid<T>(x));
  }
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const double x = an->data[i];
        const double s = stable_sigmoid<T>(x);
        g[i] += static_cast<T>(o.grad[i] * s * (1.0 + x * (1.0 - s)));
      }
    };
  }
  return emit(a.shape(), std::move(out), {a.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::log_floor(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<T>(std::log(std::max<double>(a[i], kProbFloor)));
  }
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const double x = an->data[i];
        if (x > kProbFloor) g[i] += static_cast<T>(o.grad[i] / x);
      }
    };
  }
  return emit(a.shape(), std::move(out), {a.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::neg_log_sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a[i];
    // -ln sigma(x) = softplus(-x)
    out[i] = static_cast<T>(x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)));
  }
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        g[i] -= static_cast<T>(o.grad[i] * stable_sigmoid<T>(-static_cast<double>(an->data[i])));
      }
    };
  }
  return emit(a.shape(), std::move(out), {a.node_}, std::move(bw));
}

// ---------------------------------------------------------------------------

template <class T>
Tensor<T> Tape<T>::embedding(const Tensor<T>& table, std::span<const int> ids) {
  if (table.ndim() != 2) throw DimensionError("embedding table must be 2-D");
  if (ids.empty()) throw LengthError("embedding: empty id list");
  const std::size_t v = table.dim(0), d = table.dim(1);
  std::vector<T> out(ids.size() * d);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= v) {
      throw IndexError("embedding: id " + std::to_string(ids[r]) + " outside table of " +
                       std::to_string(v) + " rows");
    }
    std::copy_n(table.data().begin() + ids[r] * d, d, out.begin() + r * d);
  }
  std::function<void(detail::Node<T>&)> bw;
  if (table.requires_grad()) {
    bw = [tn = table.node_, idv = std::vector<int>(ids.begin(), ids.end()), d](detail::Node<T>& o) {
      T* g = tn->grad_buffer();
      for (std::size_t r = 0; r < idv.size(); ++r)
        for (std::size_t c = 0; c < d; ++c) g[idv[r] * d + c] += o.grad[r * d + c];
    };
  }
  return emit({ids.size(), d}, std::move(out), {table.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::slice_cols(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  const std::size_t m = a.rows(), n = a.cols();
  if (begin >= end || end > n) throw DimensionError("slice_cols: bad column range");
  const std::size_t w = end - begin;
  std::vector<T> out(m * w);
  for (std::size_t r = 0; r < m; ++r)
    std::copy_n(a.data().begin() + r * n + begin, w, out.begin() + r * w);
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_, m, n, begin, w](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < w; ++c) g[r * n + begin + c] += o.grad[r * w + c];
    };
  }
  return emit({m, w}, std::move(out), {a.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::concat_cols(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: nothing to concatenate");
  const std::size_t m = parts[0].rows();
  std::size_t n = 0;
  bool rg = false;
  std::vector<NodePtr> inputs;
  std::vector<std::size_t> widths;
  for (const auto& p : parts) {
    if (p.rows() != m) throw DimensionError("concat_cols: row counts differ");
    widths.push_back(p.cols());
    n += p.cols();
    rg = rg || p.requires_grad();
    inputs.push_back(p.node_);
  }
  std::vector<T> out(m * n);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(p.data().begin() + r * w, w, out.begin() + r * n + off);
    off += w;
  }
  std::function<void(detail::Node<T>&)> bw;
  if (rg) {
    bw = [inputs, widths, m, n](detail::Node<T>& o) {
      std::size_t offset = 0;
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::size_t w = widths[i];
        if (inputs[i]->requires_grad) {
          T* g = inputs[i]->grad_buffer();
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < w; ++c) g[r * w + c] += o.grad[r * n + offset + c];
        }
        offset += w;
      }
    };
  }
  return emit({m, n}, std::move(out), std::move(inputs), std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::broadcast_rows(const Tensor<T>& row, std::size_t count) {
  if (row.rows() != 1) throw DimensionError("broadcast_rows: input must be a single row");
  if (count == 0) throw DimensionError("broadcast_rows: count must be positive");
  const std::size_t n = row.cols();
  std::vector<T> out(count * n);
  for (std::size_t r = 0; r < count; ++r) std::copy_n(row.data().begin(), n, out.begin() + r * n);
  std::function<void(detail::Node<T>&)> bw;
  if (row.requires_grad()) {
    bw = [rn = row.node_, count, n](detail::Node<T>& o) {
      T* g = rn->grad_buffer();
      for (std::size_t r = 0; r < count; ++r)
        for (std::size_t c = 0; c < n; ++c) g[c] += o.grad[r * n + c];
    };
  }
  return emit({count, n}, std::move(out), {row.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::gather(const Tensor<T>& a, std::span<const int> indices) {
  const std::size_t m = a.rows(), n = a.cols();
  if (indices.size() != m) throw DimensionError("gather: need one index per row");
  std::vector<T> out(m);
  for (std::size_t r = 0; r < m; ++r) {
    if (indices[r] < 0 || static_cast<std::size_t>(indices[r]) >= n) {
      throw IndexError("gather: index " + std::to_string(indices[r]) + " out of range");
    }
    out[r] = a[r * n + indices[r]];
  }
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_, idx = std::vector<int>(indices.begin(), indices.end()), n](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      for (std::size_t r = 0; r < idx.size(); ++r) g[r * n + idx[r]] += o.grad[r];
    };
  }
  return emit({m}, std::move(out), {a.node_}, std::move(bw));
}

// ---------------------------------------------------------------------------

template <class T>
Tensor<T> Tape<T>::layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                              double eps) {
  const std::size_t m = x.rows(), n = x.cols();
  if (gamma.size() != n || beta.size() != n) throw DimensionError("layer_norm: affine width mismatch");
  std::vector<T> out(x.size());
  std::vector<double> xhat(x.size()), inv_std(m);
  for (std::size_t r = 0; r < m; ++r) {
    double mu = 0;
    for (std::size_t c = 0; c < n; ++c) mu += x[r * n + c];
    mu /= n;
    double var = 0;
    for (std::size_t c = 0; c < n; ++c) {
      const double d = x[r * n + c] - mu;
      var += d * d;
    }
    var /= n;
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      const double h = (x[r * n + c] - mu) * inv_std[r];
      xhat[r * n + c] = h;
      out[r * n + c] = static_cast<T>(h * gamma[c] + beta[c]);
    }
  }
  std::function<void(detail::Node<T>&)> bw;
  if (any_requires_grad({&x, &gamma, &beta})) {
    bw = [xn = x.node_, gn = gamma.node_, bn = beta.node_, xhat = std::move(xhat),
          inv_std = std::move(inv_std), m, n](detail::Node<T>& o) {
      if (gn->requires_grad || bn->requires_grad) {
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < n; ++c) {
            if (gn->requires_grad) gn->grad_buffer()[c] += static_cast<T>(o.grad[r * n + c] * xhat[r * n + c]);
            if (bn->requires_grad) bn->grad_buffer()[c] += o.grad[r * n + c];
          }
      }
      if (xn->requires_grad) {
        T* g = xn->grad_buffer();
        std::vector<double> dh(n);
        for (std::size_t r = 0; r < m; ++r) {
          double mean_dh = 0, mean_dh_h = 0;
          for (std::size_t c = 0; c < n; ++c) {
            dh[c] = static_cast<double>(o.grad[r * n + c]) * gn->data[c];
            mean_dh += dh[c];
            mean_dh_h += dh[c] * xhat[r * n + c];
          }
          mean_dh /= n;
          mean_dh_h /= n;
          for (std::size_t c = 0; c < n; ++c) {
            g[r * n + c] += static_cast<T>(inv_std[r] * (dh[c] - mean_dh - xhat[r * n + c] * mean_dh_h));
          }
        }
      }
    };
  }
  return emit(x.shape(), std::move(out), {x.node_, gamma.node_, beta.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::causal_softmax(const Tensor<T>& scores, double scale) {
  if (scores.ndim() != 2 || scores.dim(0) != scores.dim(1)) {
    throw DimensionError("causal_softmax needs a square score matrix");
  }
  const std::size_t t = scores.dim(0);
  std::vector<T> out(t * t, T(0));
  for (std::size_t i = 0; i < t; ++i) {
    double mx = -INFINITY;
    for (std::size_t j = 0; j <= i; ++j) mx = std::max(mx, scale * scores[i * t + j]);
    double z = 0;
    std::vector<double> e(i + 1);
    for (std::size_t j = 0; j <= i; ++j) {
      e[j] = std::exp(scale * scores[i * t + j] - mx);
      z += e[j];
    }
    for (std::size_t j = 0; j <= i; ++j) out[i * t + j] = static_cast<T>(e[j] / z);
  }
  std::function<void(detail::Node<T>&)> bw;
  if (scores.requires_grad()) {
    bw = [sn = scores.node_, t, scale](detail::Node<T>& o) {
      T* g = sn->grad_buffer();
      const auto& p = o.data;
      for (std::size_t i = 0; i < t; ++i) {
        double dot = 0;
        for (std::size_t j = 0; j <= i; ++j) dot += static_cast<double>(p[i * t + j]) * o.grad[i * t + j];
        for (std::size_t j = 0; j <= i; ++j) {
          g[i * t + j] += static_cast<T>(scale * p[i * t + j] * (o.grad[i * t + j] - dot));
        }
      }
    };
  }
  return emit({t, t}, std::move(out), {scores.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::softmax_temp(const Tensor<T>& logits, double tau) {
  if (!(tau > 0) || !std::isfinite(tau)) {
    throw DomainError("softmax_temp: temperature must be positive, got " + std::to_string(tau));
  }
  const std::size_t m = logits.rows(), n = logits.cols();
  std::vector<T> out(logits.size());
  for (std::size_t r = 0; r < m; ++r) {
    double mx = -INFINITY;
    for (std::size_t c = 0; c < n; ++c) {
      const double v = logits[r * n + c];
      require_finite_check(std::isfinite(v), "softmax_temp");
      mx = std::max(mx, v);
    }
    double z = 0;
    std::vector<double> e(n);
    for (std::size_t c = 0; c < n; ++c) {
      e[c] = std::exp((logits[r * n + c] - mx) / tau);
      z += e[c];
    }
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = static_cast<T>(e[c] / z);
  }
  std::function<void(detail::Node<T>&)> bw;
  if (logits.requires_grad()) {
    bw = [ln = logits.node_, m, n, tau](detail::Node<T>& o) {
      T* g = ln->grad_buffer();
      const auto& p = o.data;
      for (std::size_t r = 0; r < m; ++r) {
        double dot = 0;
        for (std::size_t c = 0; c < n; ++c) dot += static_cast<double>(p[r * n + c]) * o.grad[r * n + c];
        for (std::size_t c = 0; c < n; ++c) {
          g[r * n + c] += static_cast<T>(p[r * n + c] * (o.grad[r * n + c] - dot) / tau);
        }
      }
    };
  }
  return emit(logits.shape(), std::move(out), {logits.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::log_prob_gather(const Tensor<T>& probs, std::span<const int> indices) {
  const std::size_t m = probs.rows(), n = probs.cols();
  if (indices.size() != m) throw DimensionError("log_prob_gather: need one index per row");
  std::vector<T> out(m);
  for (std::size_t r = 0; r < m; ++r) {
    if (indices[r] < 0 || static_cast<std::size_t>(indices[r]) >= n) {
      throw IndexError("log_prob_gather: index " + std::to_string(indices[r]) +
                       " out of range for width " + std::to_string(n));
    }
    out[r] = static_cast<T>(std::log(std::max<double>(probs[r * n + indices[r]], kProbFloor)));
  }
  std::function<void(detail::Node<T>&)> bw;
  if (probs.requires_grad()) {
    bw = [pn = probs.node_, idx = std::vector<int>(indices.begin(), indices.end()), n](detail::Node<T>& o) {
      T* g = pn->grad_buffer();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const double p = pn->data[r * n + idx[r]];
        if (p > kProbFloor) g[r * n + idx[r]] += static_cast<T>(o.grad[r] / p);
      }
    };
  }
  return emit({m}, std::move(out), {probs.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
  const std::size_t m = logits.rows(), n = logits.cols();
  if (targets.size() != m) throw DimensionError("cross_entropy: need one target per row");
  std::vector<double> probs(logits.size());
  double total = 0;
  for (std::size_t r = 0; r < m; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= n) {
      throw IndexError("cross_entropy: target out of range");
    }
    double mx = -INFINITY;
    for (std::size_t c = 0; c < n; ++c) mx = std::max<double>(mx, logits[r * n + c]);
    double z = 0;
    for (std::size_t c = 0; c < n; ++c) {
      probs[r * n + c] = std::exp(logits[r * n + c] - mx);
      z += probs[r * n + c];
    }
    for (std::size_t c = 0; c < n; ++c) probs[r * n + c] /= z;
    total += -(logits[r * n + targets[r]] - mx - std::log(z));
  }
  std::function<void(detail::Node<T>&)> bw;
  if (logits.requires_grad()) {
    bw = [ln = logits.node_, probs = std::move(probs), tg = std::vector<int>(targets.begin(), targets.end()),
          m, n](detail::Node<T>& o) {
      T* g = ln->grad_buffer();
      const double s = static_cast<double>(o.grad[0]) / m;
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          const double d = probs[r * n + c] - (static_cast<int>(c) == tg[r] ? 1.0 : 0.0);
          g[r * n + c] += static_cast<T>(s * d);
        }
    };
  }
  return emit({1}, {static_cast<T>(total / m)}, {logits.node_}, std::move(bw));
}

// ---------------------------------------------------------------------------

template <class T>
Tensor<T> Tape<T>::row_sum(const Tensor<T>& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<T> out(m);
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0;
    for (std::size_t c = 0; c < n; ++c) s += a[r * n + c];
    out[r] = static_cast<T>(s);
  }
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_, m, n](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) g[r * n + c] += o.grad[r];
    };
  }
  return emit({m}, std::move(out), {a.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::sum(const Tensor<T>& a) {
  double s = 0;
  for (auto v : a.data()) s += v;
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      for (std::size_t i = 0; i < an->data.size(); ++i) g[i] += o.grad[0];
    };
  }
  return emit({1}, {static_cast<T>(s)}, {a.node_}, std::move(bw));
}

template <class T>
Tensor<T> Tape<T>::mean(const Tensor<T>& a) {
  double s = 0;
  for (auto v : a.data()) s += v;
  const double n = static_cast<double>(a.size());
  std::function<void(detail::Node<T>&)> bw;
  if (a.requires_grad()) {
    bw = [an = a.node_, n](detail::Node<T>& o) {
      T* g = an->grad_buffer();
      const T share = static_cast<T>(o.grad[0] / n);
      for (std::size_t i = 0; i < an->data.size(); ++i) g[i] += share;
    };
  }
  return emit({1}, {static_cast<T>(s / n)}, {a.node_}, std::move(bw));
}

template class Tape<float>;
template class Tape<double>;

}  // namespace adec::ad
