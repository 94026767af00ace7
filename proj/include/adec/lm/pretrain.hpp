#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "adec/lm/transformer.hpp"

namespace adec::lm {

struct PretrainConfig {
  int steps = 1000;
  int batch_docs = 16;
  double lr = 3e-3;
  double min_lr_frac = 0.1;   // cosine decay floor
  int warmup = 50;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  double heldout_frac = 0.05;
  int heldout_eval_docs = 128;
  std::uint64_t seed = 1;
};

struct PretrainStats {
  double initial_heldout_nll = 0;
  double final_heldout_nll = 0;
  std::vector<double> train_loss;  // per step
  std::size_t train_docs = 0;
  std::size_t heldout_docs = 0;
};

/// Mean per-token NLL over the given documents, computed without recording.
double mean_nll(const BaseModel& model, const std::vector<std::vector<int>>& docs);

/// Trains all base parameters on token documents (each begins with BOS and ends
/// with EOS). The model must be unfrozen; it is frozen on return.
PretrainStats pretrain_base(BaseModel& model, const std::vector<std::vector<int>>& corpus,
                            const PretrainConfig& cfg,
                            const std::function<void(int, double)>& on_step = {});

}  // namespace adec::lm
