#pragma once

#include <cstdint>
#include <vector>

#include "adec/data/tasks.hpp"
#include "adec/decoding/record.hpp"
#include "adec/lm/inference.hpp"

namespace adec::decoding {

struct StreamId {
  std::uint64_t seed = 0;
  std::uint32_t sample_id = 0;
  std::uint32_t response_index = 0;
};

/// Decodes one response. AdaptiveSeq consults the head once, at the last
/// prompt position; AdaptiveTok consults it before every token. Stops after
/// EOS or max_new_tokens.
GenerationRecord generate(const lm::FastBase& base, const lm::FastHead* head, const data::TaskSample& sample,
                          const DecodingPolicy& policy, StreamId id);

/// n responses for each sample; result[i][j] uses stream (seed, i, j).
/// Output is independent of `workers`.
std::vector<std::vector<GenerationRecord>> generate_many(const lm::FastBase& base, const lm::FastHead* head,
                                                         const std::vector<data::TaskSample>& samples,
                                                         const DecodingPolicy& policy, int n,
                                                         std::uint64_t seed, int workers = 1);

/// Recomputes token log-probabilities of a record from the model and the
/// recorded temperatures.
std::vector<double> replay_token_logprobs(const lm::FastBase& base, const GenerationRecord& rec);

}  // namespace adec::decoding
