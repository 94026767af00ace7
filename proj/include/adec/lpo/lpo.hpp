#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adec/autodiff/params.hpp"
#include "adec/lm/inference.hpp"
#include "adec/pairs/pairs.hpp"

namespace adec::lpo {

enum class LossVariant { JointTokens, TempTokensOnly, TempAsLatents, NLLChosen };

std::string to_string(LossVariant v);
LossVariant loss_variant_from_string(const std::string& s);

struct LossConfig {
  LossVariant variant = LossVariant::TempTokensOnly;
  double beta = 0.1;
  double learning_rate = 1e-3;
  int steps = 200;
  int batch_size = 16;
  std::uint64_t seed = 1;
  // Subtract the log-probability the recorded temperatures have under a
  // uniform head, so every pair has margin 0 at initialization whatever its
  // token count.
  bool uniform_temp_reference = true;

  void validate() const;
};

nlohmann::json to_json(const LossConfig& c);
LossConfig loss_config_from_json(const nlohmann::json& j);

struct LossBreakdown {
  double total = 0;
  double margin = 0;
  double chosen_term = 0;
  double rejected_term = 0;
};

/// Everything the losses read from the frozen base for one record.
struct RecordFeatures {
  int d_model = 0;
  int k = 0;
  bool per_token = false;              // head consulted at every response token
  std::vector<double> hidden;          // decisions × d_model, head inputs
  std::vector<double> latent_hidden;   // L × d_model (sequence-level rows repeat the single decision)
  std::vector<int> temp_index;         // recorded decisions
  std::vector<double> token_q;         // L × K, q_k(y_t) with the one-hot rule at τ=0
  std::vector<double> word_logprob;    // L, log P(y_t) at the recorded temperature
  std::vector<double> ref_word_logprob;

  std::size_t decisions() const { return temp_index.size(); }
  std::size_t length() const { return word_logprob.size(); }
};

/// Recomputes per-token quantities for `rec`; `ref` defaults to `base`.
RecordFeatures extract_features(const lm::FastBase& base, const decoding::GenerationRecord& rec,
                                const lm::FastBase* ref = nullptr);

struct PairFeatures {
  RecordFeatures chosen, rejected;
};
PairFeatures extract_features(const lm::FastBase& base, const pairs::PreferencePair& pair,
                              const lm::FastBase* ref = nullptr);

/// Recorded-temperature log-probability under the head, summed over decisions.
template <class T>
ad::Tensor<T> temp_seq_logprob(ad::Tape<T>& tape, const ad::Bound<T>& head, const RecordFeatures& f);

/// Loss on one pair. `total` is a scalar tensor on the tape; the breakdown
/// holds its parts as numbers.
template <class T>
ad::Tensor<T> pair_loss(ad::Tape<T>& tape, const ad::Bound<T>& head, const PairFeatures& pf,
                        const LossConfig& cfg, LossBreakdown* out = nullptr);

// Numeric entry points binding the head without gradients.
double temp_seq_logprob(const lm::AdaptiveHead& head, const lm::FastBase& base, const decoding::GenerationRecord& rec);
LossBreakdown loss_temp_only(const pairs::PreferencePair& pair, const lm::AdaptiveHead& head,
                             const lm::FastBase& base, double beta, bool uniform_temp_reference = true);
LossBreakdown loss_joint(const pairs::PreferencePair& pair, const lm::AdaptiveHead& head, const lm::FastBase& base,
                         const lm::FastBase& ref_base, double beta, bool uniform_temp_reference = true);
LossBreakdown loss_latent(const pairs::PreferencePair& pair, const lm::AdaptiveHead& head,
                          const lm::FastBase& base, double beta);
double loss_nll_chosen(const std::vector<decoding::GenerationRecord>& chosen, const lm::AdaptiveHead& head,
                       const lm::FastBase& base);

LossBreakdown evaluate(const PairFeatures& pf, const lm::AdaptiveHead& head, const LossConfig& cfg);

/// Mean loss and its head gradient over `batch` (indices into `features`).
/// Per-pair gradients are summed in index order, so the result does not
/// depend on `workers`.
LossBreakdown batch_gradient(const std::vector<PairFeatures>& features, std::span<const std::size_t> batch,
                             const lm::AdaptiveHead& head, const LossConfig& cfg, ad::GradAccum& grads,
                             int workers = 1);

struct TrainResult {
  lm::AdaptiveHead head;
  std::vector<LossBreakdown> curve;  // batch means, one per step
};

using StepCallback = std::function<void(int step, const LossBreakdown&)>;

/// Adam on head parameters only. Throws NumericError on a non-finite loss.
TrainResult train(const std::vector<pairs::PreferencePair>& pairs, const lm::AdaptiveHead& head,
                  const lm::FastBase& base, const LossConfig& cfg, int workers = 1,
                  const StepCallback& on_step = nullptr);
TrainResult train(const std::vector<PairFeatures>& features, const lm::AdaptiveHead& head, const LossConfig& cfg,
                  int workers = 1, const StepCallback& on_step = nullptr);

void write_loss_curve(const std::string& path, const std::vector<LossBreakdown>& curve);

}  // namespace adec::lpo
