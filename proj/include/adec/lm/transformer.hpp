#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adec/autodiff/params.hpp"
#include "adec/autodiff/tape.hpp"
#include "adec/lm/config.hpp"

namespace adec::lm {

/// Pre-LN decoder-only transformer with learned absolute positions and an
/// untied, bias-free unembedding.
struct BaseModel {
  ModelConfig config;
  ad::ParamSet params;
  bool frozen = false;

  static BaseModel init(const ModelConfig& cfg, std::uint64_t seed);
};

void check_tokens(const ModelConfig& cfg, std::span<const int> tokens);

/// Final hidden states h_1..h_T (after the last layer-norm) for every position.
template <class T>
ad::Tensor<T> forward_hidden(ad::Tape<T>& tape, const ad::Bound<T>& p, const ModelConfig& cfg,
                             std::span<const int> tokens);

/// W·h for each row of h.
template <class T>
ad::Tensor<T> token_logits(ad::Tape<T>& tape, const ad::Bound<T>& p, const ad::Tensor<T>& h);

/// Convenience wrappers over a frozen bind of the model.
ad::Tensor<double> forward_hidden(const BaseModel& model, std::span<const int> tokens);
ad::Tensor<double> token_logits(const BaseModel& model, const ad::Tensor<double>& h);

/// Mean next-token NLL of a sequence under the tape path.
template <class T>
ad::Tensor<T> sequence_nll(ad::Tape<T>& tape, const ad::Bound<T>& p, const ModelConfig& cfg,
                           std::span<const int> tokens);

}  // namespace adec::lm
