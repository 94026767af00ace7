#include "adec/lm/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "adec/errors.hpp"

namespace adec::lm {

double mean_nll(const BaseModel& model, const std::vector<std::vector<int>>& docs) {
  auto p = model.params.bind<float>(false);
  double total = 0;
  std::size_t tokens = 0;
  for (const auto& d : docs) {
    if (d.size() < 2) continue;
    const std::size_t n = std::min<std::size_t>(d.size(), model.config.ctx_len);
    ad::Tape<float> tape;
    const double nll = sequence_nll(tape, p, model.config, std::span<const int>(d.data(), n)).item();
    total += nll * (n - 1);
    tokens += n - 1;
  }
  return tokens ? total / tokens : 0.0;
}

PretrainStats pretrain_base(BaseModel& model, const std::vector<std::vector<int>>& corpus,
                            const PretrainConfig& cfg, const std::function<void(int, double)>& on_step) {
  if (corpus.empty()) throw DataError("pretraining corpus is empty");
  if (model.frozen) throw ContractError("pretrain_base on a frozen model");
  std::vector<std::vector<int>> usable;
  for (const auto& d : corpus) {
    if (d.size() >= 2) usable.push_back(d.size() > std::size_t(model.config.ctx_len)
                                            ? std::vector<int>(d.begin(), d.begin() + model.config.ctx_len)
                                            : d);
  }
  if (usable.empty()) throw DataError("pretraining corpus has no document of two or more tokens");

  std::mt19937_64 rng(cfg.seed);
  std::shuffle(usable.begin(), usable.end(), rng);
  std::size_t n_held = static_cast<std::size_t>(usable.size() * cfg.heldout_frac);
  if (usable.size() > 1) n_held = std::clamp<std::size_t>(n_held, 1, usable.size() - 1);
  else n_held = 0;
  std::vector<std::vector<int>> held(usable.begin(), usable.begin() + n_held);
  std::vector<std::vector<int>> train(usable.begin() + n_held, usable.end());
  if (held.size() > std::size_t(cfg.heldout_eval_docs)) held.resize(cfg.heldout_eval_docs);

  PretrainStats st;
  st.train_docs = train.size();
  st.heldout_docs = held.size();
  st.initial_heldout_nll = held.empty() ? 0 : mean_nll(model, held);

  ad::Adam opt(ad::AdamConfig{.lr = cfg.lr, .weight_decay = cfg.weight_decay, .clip_norm = cfg.clip_norm});
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  for (int step = 0; step < cfg.steps; ++step) {
    auto p = model.params.bind<float>(true);
    double loss = 0;
    std::size_t tokens = 0;
    std::vector<const std::vector<int>*> batch;
    for (int b = 0; b < cfg.batch_docs; ++b) batch.push_back(&train[pick(rng)]);
    for (const auto* d : batch) tokens += d->size() - 1;
    for (const auto* d : batch) {
      ad::Tape<float> tape;
      auto nll = sequence_nll(tape, p, model.config, *d);
      // Token-weighted mean over the batch.
      const float w = static_cast<float>(double(d->size() - 1) / tokens);
      loss += nll.item() * w;
      tape.backward(tape.scale(nll, w));
    }
    if (!std::isfinite(loss)) throw NumericError("non-finite pretraining loss at step " + std::to_string(step));
    ad::GradAccum g(model.params);
    g.add(p);
    double scale = 1.0;
    if (step < cfg.warmup) {
      scale = double(step + 1) / cfg.warmup;
    } else if (cfg.steps > cfg.warmup) {
      const double prog = double(step - cfg.warmup) / std::max(1, cfg.steps - cfg.warmup);
      scale = cfg.min_lr_frac + (1 - cfg.min_lr_frac) * 0.5 * (1 + std::cos(std::numbers::pi * prog));
    }
    opt.step(model.params, g, scale);
    st.train_loss.push_back(loss);
    if (on_step) on_step(step, loss);
  }
  st.final_heldout_nll = held.empty() ? 0 : mean_nll(model, held);
  model.frozen = true;
  return st;
}

}  // namespace adec::lm
