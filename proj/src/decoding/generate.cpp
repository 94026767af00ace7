#include "adec/decoding/generate.hpp"

#include "adec/data/tokenizer.hpp"
#include "adec/decoding/sampling.hpp"
#include "adec/errors.hpp"
#include "adec/util/parallel.hpp"

namespace adec::decoding {

GenerationRecord generate(const lm::FastBase& base, const lm::FastHead* head, const data::TaskSample& sample,
                          const DecodingPolicy& policy, StreamId id) {
  policy.validate();
  const auto& cfg = base.config();
  if (sample.prompt.empty()) throw LengthError("empty prompt");
  if (static_cast<int>(sample.prompt.size()) + policy.max_new_tokens > cfg.ctx_len) {
    throw LengthError("prompt of " + std::to_string(sample.prompt.size()) + " tokens plus " +
                      std::to_string(policy.max_new_tokens) + " new tokens exceeds ctx_len " +
                      std::to_string(cfg.ctx_len));
  }
  if (policy.adaptive() && !head) throw ContractError("adaptive decoding needs a temperature head");

  GenerationRecord rec;
  rec.task = sample.tag;
  rec.prompt = sample.prompt;
  rec.gold = sample.gold;
  rec.constraint = sample.constraint;
  rec.variant = policy.variant;
  rec.fixed_tau = policy.fixed_tau;
  rec.rng_seed = id.seed;
  rec.sample_id = id.sample_id;
  rec.response_index = id.response_index;
  if (policy.adaptive()) rec.grid = head->grid();

  PhiloxStream tok_rng(id.seed, id.sample_id, id.response_index, StreamTag::Token);
  PhiloxStream temp_rng(id.seed, id.sample_id, id.response_index, StreamTag::Temperature);
  auto choose = [&](std::span<const float> h) {
    const auto p = head->probs(h);
    const auto c = policy.temp_selection == TempSelection::Greedy ? select_temp_greedy(p, rec.grid)
                                                                  : select_temp_sample(p, rec.grid, temp_rng);
    rec.temp_index.push_back(c.index);
    rec.temp_logprob.push_back(c.logprob);
    return c.tau;
  };

  auto cache = base.new_cache();
  std::vector<float> h(cfg.d_model), logits(cfg.vocab_size);
  for (int t : sample.prompt) base.step(cache, t, h);
  double tau = policy.fixed_tau;
  if (policy.variant == Variant::AdaptiveSeq) tau = choose(h);
  for (int step = 0; step < policy.max_new_tokens; ++step) {
    if (policy.variant == Variant::AdaptiveTok) tau = choose(h);
    base.logits(h, logits);
    const auto draw = sample_token(logits, tau, tok_rng);
    rec.response.push_back(draw.id);
    rec.token_logprob.push_back(draw.logprob);
    if (draw.id == data::Tokenizer::kEos || step + 1 == policy.max_new_tokens) break;
    base.step(cache, draw.id, h);
  }
  return rec;
}

std::vector<std::vector<GenerationRecord>> generate_many(const lm::FastBase& base, const lm::FastHead* head,
                                                         const std::vector<data::TaskSample>& samples,
                                                         const DecodingPolicy& policy, int n,
                                                         std::uint64_t seed, int workers) {
  if (n <= 0) throw ContractError("generate_many: n must be positive");
  std::vector<std::vector<GenerationRecord>> out(samples.size(), std::vector<GenerationRecord>(n));
  parallel_for(samples.size() * n, workers, [&](std::size_t k) {
    const std::size_t i = k / n, j = k % n;
    out[i][j] = generate(base, head, samples[i], policy,
                         StreamId{seed, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
  });
  return out;
}

std::vector<double> replay_token_logprobs(const lm::FastBase& base, const GenerationRecord& rec) {
  rec.validate();
  const auto& cfg = base.config();
  auto cache = base.new_cache();
  std::vector<float> h(cfg.d_model), logits(cfg.vocab_size);
  for (int t : rec.prompt) base.step(cache, t, h);
  std::vector<double> out;
  for (std::size_t t = 0; t < rec.response.size(); ++t) {
    base.logits(h, logits);
    const int y = rec.response[t];
    out.push_back(token_logprob(logits, rec.tau_at(t), y));
    if (t + 1 < rec.response.size()) base.step(cache, y, h);
  }
  return out;
}

}  // namespace adec::decoding
