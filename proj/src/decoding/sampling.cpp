#include "adec/decoding/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "adec/autodiff/tensor.hpp"
#include "adec/errors.hpp"

namespace adec::decoding {

namespace {

void check_finite(std::span<const float> logits) {
  if (logits.empty()) throw DimensionError("empty logits");
  for (float v : logits) {
    if (!std::isfinite(v)) throw NumericError("non-finite logit");
  }
}

void check_distribution(std::span<const double> p, std::span<const double> grid) {
  if (p.size() != grid.size() || p.empty()) throw DimensionError("temperature distribution and grid differ in size");
  double s = 0;
  for (double v : p) {
    if (!(v >= 0) || !std::isfinite(v)) throw DomainError("temperature probabilities must be finite and nonnegative");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-4) throw DomainError("temperature probabilities must sum to 1");
}

int inverse_cdf(std::span<const double> p, double u) {
  double c = 0;
  int last = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0) continue;
    last = static_cast<int>(i);
    c += p[i];
    if (u < c) return last;
  }
  return last;  // u beyond the rounded total
}

}  // namespace

int argmax(std::span<const float> xs) {
  return static_cast<int>(std::max_element(xs.begin(), xs.end()) - xs.begin());
}

int argmax(std::span<const double> xs) {
  return static_cast<int>(std::max_element(xs.begin(), xs.end()) - xs.begin());
}

std::vector<double> tempered_probs(std::span<const float> logits, double tau) {
  if (!(tau > 0)) throw DomainError("tempered_probs needs tau > 0");
  check_finite(logits);
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < p.size(); ++i) z += (p[i] = std::exp((logits[i] - mx) / tau));
  for (auto& v : p) v /= z;
  return p;
}

TokenDraw sample_token(std::span<const float> logits, double tau, PhiloxStream& rng) {
  if (tau < 0 || !std::isfinite(tau)) throw DomainError("token temperature must be finite and nonnegative");
  check_finite(logits);
  const double u = rng.uniform();
  if (tau == 0) return {argmax(logits), 0.0};
  const auto p = tempered_probs(logits, tau);
  const int id = inverse_cdf(p, u);
  return {id, std::log(std::max(p[id], ad::kProbFloor))};
}

TempChoice select_temp_greedy(std::span<const double> p, std::span<const double> grid) {
  check_distribution(p, grid);
  const int k = argmax(p);
  return {grid[k], k, std::log(std::max(p[k], ad::kProbFloor))};
}

TempChoice select_temp_sample(std::span<const double> p, std::span<const double> grid, PhiloxStream& rng) {
  check_distribution(p, grid);
  const int k = inverse_cdf(p, rng.uniform());
  return {grid[k], k, std::log(std::max(p[k], ad::kProbFloor))};
}

std::vector<double> mixture_next_token_dist(std::span<const float> logits, std::span<const double> p,
                                            std::span<const double> grid) {
  check_distribution(p, grid);
  check_finite(logits);
  std::vector<double> out(logits.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (p[k] == 0) continue;
    if (grid[k] == 0) {
      out[argmax(logits)] += p[k];
      continue;
    }
    const auto q = tempered_probs(logits, grid[k]);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[k] * q[i];
  }
  return out;
}

double token_logprob(std::span<const float> logits, double tau, int id) {
  if (id < 0 || static_cast<std::size_t>(id) >= logits.size()) throw IndexError("token id out of range");
  if (tau == 0) return id == argmax(logits) ? 0.0 : std::log(ad::kProbFloor);
  return std::log(std::max(tempered_probs(logits, tau)[id], ad::kProbFloor));
}

}  // namespace adec::decoding
