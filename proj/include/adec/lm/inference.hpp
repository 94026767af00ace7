#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "adec/lm/head.hpp"
#include "adec/lm/transformer.hpp"

namespace adec::lm {

using RowMatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVecF = Eigen::Matrix<float, 1, Eigen::Dynamic>;

/// Incremental float32 evaluation of a BaseModel with a key/value cache.
/// Read-only after construction; each sequence owns its own Cache.
class FastBase {
 public:
  explicit FastBase(const BaseModel& model);

  struct Cache {
    std::vector<RowMatF> k, v;  // per layer, ctx_len × d_model
    int len = 0;
  };

  const ModelConfig& config() const { return cfg_; }
  Cache new_cache() const;

  /// Appends one token and writes its final hidden state (length d_model).
  void step(Cache& cache, int token, std::span<float> h) const;
  void logits(std::span<const float> h, std::span<float> out) const;

  /// Hidden states for every position, row-major T × d_model.
  std::vector<float> hidden_all(std::span<const int> tokens) const;

 private:
  struct Layer {
    RowVecF ln1_g, ln1_b, bqkv, bo, ln2_g, ln2_b, b1, b2;
    RowMatF wqkv, wo, w1, w2;
  };
  ModelConfig cfg_;
  RowMatF tok_emb_, pos_emb_, unembed_;
  RowVecF lnf_g_, lnf_b_;
  std::vector<Layer> layers_;
};

/// Float32 evaluation of the temperature head.
class FastHead {
 public:
  explicit FastHead(const AdaptiveHead& head);
  int k() const { return static_cast<int>(grid_.size()); }
  const std::vector<double>& grid() const { return grid_; }
  std::vector<double> probs(std::span<const float> h) const;

 private:
  std::vector<double> grid_;
  RowMatF w1_, w2_, w3_;
  RowVecF b1_, b2_, b3_;
};

}  // namespace adec::lm
