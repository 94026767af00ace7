#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "adec/data/tasks.hpp"
#include "adec/decoding/record.hpp"
#include "adec/lm/config.hpp"
#include "adec/lm/pretrain.hpp"
#include "adec/lpo/lpo.hpp"

namespace adec::pipeline {

/// Prompt sets. "mixed" splits each count 1:1:2 into arith, diverse and
/// general prompts.
struct TaskSpec {
  std::string kind = "mixed";  // arith | diverse | constrained | completion | mixed
  int train = 200;
  int test = 100;
  std::uint64_t seed = 11;
  void validate() const;
};

struct OracleSpec {
  std::string kind = "auto";
  std::string endpoint;  // used when kind is "remote"
  double timeout_s = 10.0;
  int retries = 2;
  int max_in_flight = 4;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  lm::ModelConfig model;
  data::CorpusConfig corpus;
  lm::PretrainConfig pretrain;
  TaskSpec tasks;
  decoding::DecodingPolicy pair_policy =
      decoding::DecodingPolicy::adaptive(decoding::Variant::AdaptiveSeq, decoding::TempSelection::Sample);
  decoding::DecodingPolicy eval_policy =
      decoding::DecodingPolicy::adaptive(decoding::Variant::AdaptiveSeq, decoding::TempSelection::Greedy);
  lpo::LossConfig loss;
  OracleSpec oracle;
  int n_per_prompt = 16;
  std::vector<double> fixed_temps;  // empty means the model's grid
  int vote_n = 0;                   // > 0 adds majority-vote accuracy on arithmetic prompts

  void validate() const;
  /// Hash over everything that changes the produced artifacts.
  std::string hash() const;
  std::vector<double> baseline_temps() const;
};

nlohmann::json to_json(const data::CorpusConfig& c);
data::CorpusConfig corpus_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const lm::PretrainConfig& c);
lm::PretrainConfig pretrain_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TaskSpec& t);
TaskSpec task_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OracleSpec& o);
OracleSpec oracle_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& c);
/// Unknown keys anywhere in the document are rejected with UsageError.
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// Model settings used by the bundled experiments: vocabulary from the
/// tokenizer and the desk-scale transformer shape.
lm::ModelConfig desk_model_config(std::vector<double> grid);
/// Corpus and schedule for the shared desk-scale base.
data::CorpusConfig desk_corpus_config();
lm::PretrainConfig desk_pretrain_config();

}  // namespace adec::pipeline
