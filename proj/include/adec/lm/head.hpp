#pragma once

#include <cstdint>
#include <vector>

#include "adec/autodiff/params.hpp"
#include "adec/autodiff/tape.hpp"
#include "adec/lm/config.hpp"

namespace adec::lm {

/// Three affine layers with SiLU between them, then a softmax over the
/// temperature grid. The last layer starts at zero so the initial
/// distribution is uniform.
struct AdaptiveHead {
  int d_model = 0;
  int hidden = 0;
  std::vector<double> grid;
  ad::ParamSet params;

  int k() const { return static_cast<int>(grid.size()); }
  static AdaptiveHead init(const ModelConfig& cfg, std::uint64_t seed);
};

/// Rows of h [n×d] map to rows of temperature logits [n×K].
template <class T>
ad::Tensor<T> temp_logits(ad::Tape<T>& tape, const ad::Bound<T>& p, const ad::Tensor<T>& h);

template <class T>
ad::Tensor<T> temp_distribution(ad::Tape<T>& tape, const ad::Bound<T>& p, const ad::Tensor<T>& h);

/// One hidden vector to one distribution, without recording.
std::vector<double> temp_distribution(const AdaptiveHead& head, std::span<const float> h);

}  // namespace adec::lm
