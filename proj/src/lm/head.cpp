#include "adec/lm/head.hpp"

#include <cmath>
#include <random>

#include "adec/errors.hpp"

namespace adec::lm {

AdaptiveHead AdaptiveHead::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  AdaptiveHead h;
  h.d_model = cfg.d_model;
  h.hidden = cfg.head_hidden;
  h.grid = cfg.temperature_grid;
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.d_model, hh = cfg.head_hidden, k = cfg.temperature_grid.size();
  auto uniform = [&](std::size_t fan_in, std::size_t n) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(u(rng));
    return v;
  };
  h.params.add("head.w1", {d, hh}, uniform(d, d * hh));
  h.params.add("head.b1", {hh}, uniform(d, hh));
  h.params.add("head.w2", {hh, hh}, uniform(hh, hh * hh));
  h.params.add("head.b2", {hh}, uniform(hh, hh));
  h.params.add("head.w3", {hh, k}, std::vector<float>(hh * k, 0.0f));
  h.params.add("head.b3", {k}, std::vector<float>(k, 0.0f));
  return h;
}

template <class T>
ad::Tensor<T> temp_logits(ad::Tape<T>& tape, const ad::Bound<T>& p, const ad::Tensor<T>& h) {
  const auto& w1 = p["head.w1"];
  if (h.cols() != w1.dim(0)) {
    throw DimensionError("temperature head expects width " + std::to_string(w1.dim(0)) + ", got " +
                         std::to_string(h.cols()));
  }
  auto a = tape.silu(tape.add_bias(tape.matmul(h, w1), p["head.b1"]));
  auto b = tape.silu(tape.add_bias(tape.matmul(a, p["head.w2"]), p["head.b2"]));
  return tape.add_bias(tape.matmul(b, p["head.w3"]), p["head.b3"]);
}

template <class T>
ad::Tensor<T> temp_distribution(ad::Tape<T>& tape, const ad::Bound<T>& p, const ad::Tensor<T>& h) {
  return tape.softmax_temp(temp_logits(tape, p, h), 1.0);
}

std::vector<double> temp_distribution(const AdaptiveHead& head, std::span<const float> h) {
  if (static_cast<int>(h.size()) != head.d_model) {
    throw DimensionError("temperature head expects width " + std::to_string(head.d_model) + ", got " +
                         std::to_string(h.size()));
  }
  auto p = head.params.bind<double>(false);
  ad::Tape<double> tape;
  auto probs = temp_distribution(tape, p, ad::Tensor<double>({h.size()}, {h.begin(), h.end()}));
  return {probs.data().begin(), probs.data().end()};
}

template ad::Tensor<float> temp_logits(ad::Tape<float>&, const ad::Bound<float>&, const ad::Tensor<float>&);
template ad::Tensor<double> temp_logits(ad::Tape<double>&, const ad::Bound<double>&, const ad::Tensor<double>&);
template ad::Tensor<float> temp_distribution(ad::Tape<float>&, const ad::Bound<float>&, const ad::Tensor<float>&);
template ad::Tensor<double> temp_distribution(ad::Tape<double>&, const ad::Bound<double>&,
                                              const ad::Tensor<double>&);

}  // namespace adec::lm
