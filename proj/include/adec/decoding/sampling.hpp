#pragma once

#include <span>
#include <vector>

#include "adec/decoding/philox.hpp"

namespace adec::decoding {

struct TokenDraw {
  int id = 0;
  double logprob = 0;  // 0 by convention when tau == 0
};

struct TempChoice {
  double tau = 0;
  int index = 0;
  double logprob = 0;  // ln p[index]
};

/// Lowest index among maxima.
int argmax(std::span<const float> xs);
int argmax(std::span<const double> xs);

/// softmax(logits / tau) in 64-bit; tau must be positive.
std::vector<double> tempered_probs(std::span<const float> logits, double tau);

/// tau > 0 draws from softmax(logits/tau) by inverse CDF with one uniform;
/// tau == 0 is argmax. Exactly one uniform is consumed either way.
TokenDraw sample_token(std::span<const float> logits, double tau, PhiloxStream& rng);

TempChoice select_temp_greedy(std::span<const double> p, std::span<const double> grid);
/// Consumes exactly one uniform.
TempChoice select_temp_sample(std::span<const double> p, std::span<const double> grid, PhiloxStream& rng);

/// Sum_k p[k] * softmax(logits / grid[k]), with grid value 0 contributing a
/// one-hot at the argmax.
std::vector<double> mixture_next_token_dist(std::span<const float> logits, std::span<const double> p,
                                            std::span<const double> grid);

/// log of softmax(logits/tau)[id] (floored), or the one-hot convention at
/// tau == 0 (0 for the argmax, ln 1e-8 otherwise).
double token_logprob(std::span<const float> logits, double tau, int id);

}  // namespace adec::decoding
