#pragma once

#include <functional>
#include <string>
#include <vector>

#include "adec/decoding/generate.hpp"
#include "adec/eval/eval.hpp"
#include "adec/lm/head.hpp"
#include "adec/lm/inference.hpp"
#include "adec/lm/transformer.hpp"
#include "adec/pipeline/config.hpp"
#include "adec/rewards/oracle.hpp"

namespace adec::pipeline {

using Log = std::function<void(const std::string&)>;

/// Train and test prompts come from disjoint seeds. "mixed" splits the count
/// 1:1:2 into arith, diverse and general prompts.
std::vector<data::TaskSample> make_tasks(const TaskSpec& spec, bool test_split);
std::vector<data::TaskSample> make_tasks(const std::string& kind, int n, std::uint64_t seed);

/// `endpoint_flag` overrides the environment, which overrides the config.
rewards::Oracle make_oracle(const OracleSpec& spec, const std::string& endpoint_flag = "");

/// Cache key over the base shape, the corpus and the schedule.
std::string base_key(const lm::ModelConfig& model, const data::CorpusConfig& corpus,
                     const lm::PretrainConfig& pretrain);

/// Loads `<cache_dir>/base-<key>.adck` or pretrains and stores it. An empty
/// cache_dir always pretrains. The returned model is frozen.
lm::BaseModel obtain_base(const lm::ModelConfig& model, const data::CorpusConfig& corpus,
                          const lm::PretrainConfig& pretrain, const std::string& cache_dir,
                          const Log& log = {});

struct PolicyRun {
  std::string name;
  std::vector<decoding::GenerationRecord> records;  // one per prompt
  std::vector<rewards::Score> scores;
};

/// "tau=<value>" for fixed temperatures, "adaptive" otherwise.
std::string policy_label(const decoding::DecodingPolicy& p);

/// Prompt i uses stream (seed, i, 0), so policies compared on the same prompts
/// share their random numbers.
PolicyRun run_policy(const lm::FastBase& base, const lm::FastHead* head,
                     const std::vector<data::TaskSample>& samples, const decoding::DecodingPolicy& policy,
                     const rewards::Oracle& oracle, std::uint64_t seed, int workers, std::string name = "");

std::vector<rewards::Score> score_all(const rewards::Oracle& oracle,
                                      const std::vector<decoding::GenerationRecord>& records, int workers);

/// Winrates of `subject` against every baseline per task tag, arithmetic
/// accuracy per policy, mean scores, and the subject's temperature usage when
/// it decoded adaptively.
eval::EvalReport compare_policies(const PolicyRun& subject, const std::vector<PolicyRun>& baselines);

/// Majority vote of n samples per prompt; prompts without gold are skipped.
double vote_accuracy(const lm::FastBase& base, const lm::FastHead* head,
                     const std::vector<data::TaskSample>& samples, const decoding::DecodingPolicy& policy, int n,
                     std::uint64_t seed, int workers);

/// Mean of score values over records tagged arith, or over all records when
/// none carry that tag.
double arith_accuracy(const PolicyRun& run);

}  // namespace adec::pipeline
