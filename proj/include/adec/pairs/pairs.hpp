#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "adec/decoding/generate.hpp"
#include "adec/rewards/oracle.hpp"

namespace adec::pairs {

struct PreferencePair {
  decoding::GenerationRecord chosen, rejected;
  rewards::Score chosen_score, rejected_score;
  std::size_t prompt_index = 0;
};

struct PairChoice {
  std::size_t chosen = 0, rejected = 0;
};

/// argmax / argmin with lowest-index ties; nothing when all values are equal.
std::optional<PairChoice> choose_by_score(std::span<const double> values);

/// Chosen: highest constraint rate among the four best RM scores.
/// Rejected: lowest constraint rate among the four worst RM scores.
/// Ties inside each set go to the better (chosen) or worse (rejected) RM
/// score, then the lower index. Nothing when the result would not order
/// chosen strictly above rejected by (constraint rate, RM score).
std::optional<PairChoice> choose_constrained(std::span<const double> rm_scores,
                                             std::span<const double> constraint_rates);

std::optional<PreferencePair> build_pair_by_score(const std::vector<decoding::GenerationRecord>& records,
                                                  const std::vector<rewards::Score>& scores);
std::optional<PreferencePair> build_pair_constrained(const std::vector<decoding::GenerationRecord>& records,
                                                     const std::vector<rewards::Score>& rm_scores,
                                                     const std::vector<double>& constraint_rates);

enum class PairRule { Auto, ByScore, Constrained };

struct DatasetStats {
  std::size_t prompts = 0;
  std::size_t pairs = 0;
  std::size_t uninformative = 0;
  std::size_t failed = 0;
};

struct Dataset {
  std::vector<PreferencePair> pairs;
  DatasetStats stats;
};

/// N sampled responses per prompt, scored, reduced to at most one pair per
/// prompt. Auto uses the constrained rule for constrained prompts.
Dataset build_dataset(const lm::FastBase& base, const lm::FastHead& head,
                      const std::vector<data::TaskSample>& samples, int n,
                      const decoding::DecodingPolicy& policy, const rewards::Oracle& oracle,
                      std::uint64_t seed, int workers = 1, PairRule rule = PairRule::Auto);

nlohmann::json to_json(const rewards::Score& s);
rewards::Score score_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PreferencePair& p);
PreferencePair preference_pair_from_json(const nlohmann::json& j);
void write_pairs(const std::string& path, const std::vector<PreferencePair>& pairs, const nlohmann::json& header);
std::vector<PreferencePair> read_pairs(const std::string& path, nlohmann::json* header = nullptr);

}  // namespace adec::pairs
