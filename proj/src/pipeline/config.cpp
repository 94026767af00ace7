#include "adec/pipeline/config.hpp"

#include <fstream>
#include <set>

#include "adec/data/tokenizer.hpp"
#include "adec/errors.hpp"
#include "adec/util/hash.hpp"

namespace adec::pipeline {

namespace {

// Reads known keys from one JSON object and rejects the rest.
class Fields {
 public:
  Fields(const nlohmann::json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) throw UsageError(ctx_ + " must be a JSON object");
  }
  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(ctx_ + "." + key + ": " + e.what());
    }
  }
  const nlohmann::json* sub(const char* key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }
  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw UsageError("unknown key '" + k + "' in " + ctx_);
    }
  }

 private:
  const nlohmann::json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

}  // namespace

void TaskSpec::validate() const {
  static const std::set<std::string> kinds{"arith", "diverse", "constrained", "completion", "mixed"};
  if (!kinds.count(kind)) throw UsageError("unknown task kind '" + kind + "'");
  if (train < 0 || test < 0) throw UsageError("task counts must be nonnegative");
}

void ExperimentConfig::validate() const {
  model.validate();
  if (model.vocab_size != data::tokenizer().vocab_size()) {
    throw UsageError("model.vocab_size must equal the tokenizer vocabulary (" +
                     std::to_string(data::tokenizer().vocab_size()) + ")");
  }
  tasks.validate();
  pair_policy.validate();
  eval_policy.validate();
  if (!pair_policy.adaptive() || pair_policy.temp_selection != decoding::TempSelection::Sample) {
    throw UsageError("pair_policy must be adaptive with sampled temperatures");
  }
  if (!eval_policy.adaptive()) throw UsageError("eval_policy must be adaptive");
  loss.validate();
  if (n_per_prompt < 2) throw UsageError("n_per_prompt must be at least 2");
  if (vote_n < 0) throw UsageError("vote_n must be nonnegative");
  for (double t : fixed_temps) decoding::DecodingPolicy::fixed(t);
}

std::vector<double> ExperimentConfig::baseline_temps() const {
  return fixed_temps.empty() ? model.temperature_grid : fixed_temps;
}

std::string ExperimentConfig::hash() const {
  auto j = to_json(*this);
  j.erase("out_dir");
  j.erase("name");
  return hex64(fnv1a64(j.dump()));
}

nlohmann::json to_json(const data::CorpusConfig& c) {
  return {{"arith_docs", c.arith_docs},
          {"diverse_docs", c.diverse_docs},
          {"constrained_docs", c.constrained_docs},
          {"plain_docs", c.plain_docs},
          {"arith_noise", c.arith_noise},
          {"constraint_compliance", c.constraint_compliance},
          {"seed", c.seed}};
}

data::CorpusConfig corpus_config_from_json(const nlohmann::json& j) {
  data::CorpusConfig c;
  Fields f(j, "corpus");
  f.get("arith_docs", c.arith_docs);
  f.get("diverse_docs", c.diverse_docs);
  f.get("constrained_docs", c.constrained_docs);
  f.get("plain_docs", c.plain_docs);
  f.get("arith_noise", c.arith_noise);
  f.get("constraint_compliance", c.constraint_compliance);
  f.get("seed", c.seed);
  f.finish();
  if (c.arith_noise < 0 || c.arith_noise > 1) throw UsageError("corpus.arith_noise must lie in [0, 1]");
  if (c.constraint_compliance < 0 || c.constraint_compliance > 1) {
    throw UsageError("corpus.constraint_compliance must lie in [0, 1]");
  }
  return c;
}

nlohmann::json to_json(const lm::PretrainConfig& c) {
  return {{"steps", c.steps},
          {"batch_docs", c.batch_docs},
          {"lr", c.lr},
          {"min_lr_frac", c.min_lr_frac},
          {"warmup", c.warmup},
          {"weight_decay", c.weight_decay},
          {"clip_norm", c.clip_norm},
          {"heldout_frac", c.heldout_frac},
          {"heldout_eval_docs", c.heldout_eval_docs},
          {"seed", c.seed}};
}

lm::PretrainConfig pretrain_config_from_json(const nlohmann::json& j) {
  lm::PretrainConfig c;
  Fields f(j, "pretrain");
  f.get("steps", c.steps);
  f.get("batch_docs", c.batch_docs);
  f.get("lr", c.lr);
  f.get("min_lr_frac", c.min_lr_frac);
  f.get("warmup", c.warmup);
  f.get("weight_decay", c.weight_decay);
  f.get("clip_norm", c.clip_norm);
  f.get("heldout_frac", c.heldout_frac);
  f.get("heldout_eval_docs", c.heldout_eval_docs);
  f.get("seed", c.seed);
  f.finish();
  if (c.steps < 0 || c.batch_docs < 1 || !(c.lr > 0)) {
    throw UsageError("pretrain needs steps >= 0, batch_docs >= 1, lr > 0");
  }
  return c;
}

nlohmann::json to_json(const TaskSpec& t) {
  return {{"kind", t.kind}, {"train", t.train}, {"test", t.test}, {"seed", t.seed}};
}

TaskSpec task_spec_from_json(const nlohmann::json& j) {
  TaskSpec t;
  Fields f(j, "tasks");
  f.get("kind", t.kind);
  f.get("train", t.train);
  f.get("test", t.test);
  f.get("seed", t.seed);
  f.finish();
  t.validate();
  return t;
}

nlohmann::json to_json(const OracleSpec& o) {
  return {{"kind", o.kind},
          {"endpoint", o.endpoint},
          {"timeout_s", o.timeout_s},
          {"retries", o.retries},
          {"max_in_flight", o.max_in_flight}};
}

OracleSpec oracle_spec_from_json(const nlohmann::json& j) {
  OracleSpec o;
  if (j.is_string()) {
    o.kind = j.get<std::string>();
    return o;
  }
  Fields f(j, "oracle");
  f.get("kind", o.kind);
  f.get("endpoint", o.endpoint);
  f.get("timeout_s", o.timeout_s);
  f.get("retries", o.retries);
  f.get("max_in_flight", o.max_in_flight);
  f.finish();
  return o;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"name", c.name},
          {"seed", c.seed},
          {"out_dir", c.out_dir},
          {"model", lm::to_json(c.model)},
          {"corpus", to_json(c.corpus)},
          {"pretrain", to_json(c.pretrain)},
          {"tasks", to_json(c.tasks)},
          {"pair_policy", decoding::to_json(c.pair_policy)},
          {"eval_policy", decoding::to_json(c.eval_policy)},
          {"loss", lpo::to_json(c.loss)},
          {"oracle", to_json(c.oracle)},
          {"n_per_prompt", c.n_per_prompt},
          {"fixed_temps", c.fixed_temps},
          {"vote_n", c.vote_n}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.model.vocab_size = data::tokenizer().vocab_size();
  Fields f(j, "config");
  f.get("name", c.name);
  f.get("seed", c.seed);
  f.get("out_dir", c.out_dir);
  if (auto* m = f.sub("model")) {
    auto mj = *m;
    if (mj.is_object() && !mj.contains("vocab_size")) mj["vocab_size"] = c.model.vocab_size;
    c.model = lm::model_config_from_json(mj);
  }
  if (auto* s = f.sub("corpus")) c.corpus = corpus_config_from_json(*s);
  if (auto* s = f.sub("pretrain")) c.pretrain = pretrain_config_from_json(*s);
  if (auto* s = f.sub("tasks")) c.tasks = task_spec_from_json(*s);
  if (auto* s = f.sub("pair_policy")) c.pair_policy = decoding::decoding_policy_from_json(*s);
  if (auto* s = f.sub("eval_policy")) c.eval_policy = decoding::decoding_policy_from_json(*s);
  if (auto* s = f.sub("loss")) c.loss = lpo::loss_config_from_json(*s);
  if (auto* s = f.sub("oracle")) c.oracle = oracle_spec_from_json(*s);
  f.get("n_per_prompt", c.n_per_prompt);
  f.get("fixed_temps", c.fixed_temps);
  f.get("vote_n", c.vote_n);
  f.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError(path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

lm::ModelConfig desk_model_config(std::vector<double> grid) {
  lm::ModelConfig c;
  c.vocab_size = data::tokenizer().vocab_size();
  c.d_model = 64;
  c.n_layers = 2;
  c.n_heads = 4;
  c.ctx_len = 128;
  c.head_hidden = 128;
  c.temperature_grid = std::move(grid);
  c.validate();
  return c;
}

data::CorpusConfig desk_corpus_config() {
  data::CorpusConfig c;
  c.arith_docs = 20000;
  c.arith_noise = 0.55;
  return c;
}

lm::PretrainConfig desk_pretrain_config() {
  lm::PretrainConfig c;
  c.steps = 6000;
  return c;
}

}  // namespace adec::pipeline
