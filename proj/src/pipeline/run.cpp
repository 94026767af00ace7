#include "adec/pipeline/run.hpp"

#include <cstdio>
#include <filesystem>
#include <map>
#include <set>

#include "adec/data/tokenizer.hpp"
#include "adec/errors.hpp"
#include "adec/lm/checkpoint.hpp"
#include "adec/lm/pretrain.hpp"
#include "adec/util/hash.hpp"
#include "adec/util/parallel.hpp"

namespace adec::pipeline {

namespace fs = std::filesystem;

std::vector<data::TaskSample> make_tasks(const std::string& kind, int n, std::uint64_t seed) {
  if (kind == "arith") return data::gen_arith(n, seed);
  if (kind == "diverse") return data::gen_diverse(n, seed);
  if (kind == "constrained") return data::gen_constrained(n, seed);
  if (kind == "completion") return data::gen_completion(n, seed);
  if (kind == "mixed") {
    const int a = n / 4, d = n / 4;
    return data::gen_mixed(a, d, n - a - d, seed);
  }
  throw UsageError("unknown task kind '" + kind + "'");
}

std::vector<data::TaskSample> make_tasks(const TaskSpec& spec, bool test_split) {
  spec.validate();
  const std::uint64_t seed = test_split ? spec.seed * 1000003ULL + 17 : spec.seed;
  return make_tasks(spec.kind, test_split ? spec.test : spec.train, seed);
}

rewards::Oracle make_oracle(const OracleSpec& spec, const std::string& endpoint_flag) {
  const auto kind = rewards::oracle_kind_from_string(spec.kind);
  std::shared_ptr<rewards::RemoteScorer> remote;
  if (kind == rewards::OracleKind::Remote) {
    rewards::RemoteConfig rc;
    rc.endpoint = rewards::resolve_endpoint(endpoint_flag, spec.endpoint);
    if (rc.endpoint.empty()) {
      throw UsageError(std::string("remote oracle needs an endpoint (flag, ") + rewards::kRemoteEndpointEnv +
                       " or config)");
    }
    rc.timeout_s = spec.timeout_s;
    rc.retries = spec.retries;
    rc.max_in_flight = spec.max_in_flight;
    remote = std::make_shared<rewards::RemoteScorer>(rc);
  }
  return rewards::Oracle(kind, remote);
}

std::string base_key(const lm::ModelConfig& model, const data::CorpusConfig& corpus,
                     const lm::PretrainConfig& pretrain) {
  const std::string s = model.base_hash() + to_json(corpus).dump() + to_json(pretrain).dump();
  return hex64(fnv1a64(s));
}

lm::BaseModel obtain_base(const lm::ModelConfig& model, const data::CorpusConfig& corpus,
                          const lm::PretrainConfig& pretrain, const std::string& cache_dir, const Log& log) {
  const std::string key = base_key(model, corpus, pretrain);
  fs::path path;
  if (!cache_dir.empty()) {
    path = fs::path(cache_dir) / ("base-" + key + ".adck");
    if (fs::exists(path)) {
      auto ck = lm::load_checkpoint(path.string());
      if (ck.meta.config_hash == key && lm::has_base(ck)) {
        if (log) log("loaded base " + path.string());
        auto base = lm::base_from(ck);
        base.frozen = true;
        return base;
      }
      if (log) log("ignoring stale cache entry " + path.string());
    }
  }
  if (log) log("pretraining base (" + std::to_string(pretrain.steps) + " steps)");
  auto base = lm::BaseModel::init(model, pretrain.seed);
  const auto docs = data::encode_corpus(data::build_corpus(corpus));
  const int every = std::max(1, pretrain.steps / 10);
  const auto stats = lm::pretrain_base(base, docs, pretrain, [&](int step, double loss) {
    if (log && (step + 1) % every == 0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  step %d loss %.4f", step + 1, loss);
      log(buf);
    }
  });
  if (log) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "held-out nll %.4f -> %.4f", stats.initial_heldout_nll, stats.final_heldout_nll);
    log(buf);
  }
  if (!path.empty()) {
    fs::create_directories(path.parent_path());
    lm::CheckpointMeta meta{pretrain.steps, pretrain.seed, key, "base"};
    const fs::path tmp = path.string() + ".tmp";
    lm::save_checkpoint(tmp.string(), lm::make_checkpoint(&base, nullptr, meta));
    fs::rename(tmp, path);
  }
  return base;
}

std::string policy_label(const decoding::DecodingPolicy& p) {
  if (p.adaptive()) return "adaptive";
  char buf[32];
  std::snprintf(buf, sizeof buf, "tau=%g", p.fixed_tau);
  return buf;
}

std::vector<rewards::Score> score_all(const rewards::Oracle& oracle,
                                      const std::vector<decoding::GenerationRecord>& records, int workers) {
  std::vector<rewards::Score> out(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) { out[i] = oracle.score(records[i]); });
  return out;
}

PolicyRun run_policy(const lm::FastBase& base, const lm::FastHead* head,
                     const std::vector<data::TaskSample>& samples, const decoding::DecodingPolicy& policy,
                     const rewards::Oracle& oracle, std::uint64_t seed, int workers, std::string name) {
  PolicyRun run;
  run.name = name.empty() ? policy_label(policy) : std::move(name);
  run.records.resize(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    run.records[i] = decoding::generate(base, head, samples[i], policy,
                                        decoding::StreamId{seed, static_cast<std::uint32_t>(i), 0});
  });
  run.scores = score_all(oracle, run.records, workers);
  return run;
}

double arith_accuracy(const PolicyRun& run) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < run.records.size(); ++i) {
    if (run.records[i].task != data::TaskTag::Arith) continue;
    s += run.scores[i].value;
    ++n;
  }
  if (n == 0) {
    for (const auto& sc : run.scores) s += sc.value;
    n = run.scores.size();
  }
  return n ? s / static_cast<double>(n) : 0.0;
}

eval::EvalReport compare_policies(const PolicyRun& subject, const std::vector<PolicyRun>& baselines) {
  eval::EvalReport rep;
  std::map<data::TaskTag, std::vector<std::size_t>> by_task;
  for (std::size_t i = 0; i < subject.records.size(); ++i) by_task[subject.records[i].task].push_back(i);
  auto pick = [](const PolicyRun& r, const std::vector<std::size_t>& idx) {
    std::vector<rewards::Score> out;
    for (auto i : idx) out.push_back(r.scores[i]);
    return out;
  };
  auto mean_of = [](const std::vector<rewards::Score>& s) {
    double t = 0;
    for (const auto& x : s) t += x.value;
    return s.empty() ? 0.0 : t / static_cast<double>(s.size());
  };
  std::vector<const PolicyRun*> all{&subject};
  for (const auto& b : baselines) {
    if (b.records.size() != subject.records.size()) {
      throw ContractError("policy " + b.name + " was run on a different prompt set");
    }
    all.push_back(&b);
  }
  for (const auto& [task, idx] : by_task) {
    const auto name = data::to_string(task);
    const auto mine = pick(subject, idx);
    for (const auto& b : baselines) rep.winrates[name][b.name] = eval::task_winrate(task, mine, pick(b, idx));
    for (const auto* r : all) rep.metrics["mean_score/" + name + "/" + r->name] = mean_of(pick(*r, idx));
  }
  if (by_task.count(data::TaskTag::Arith)) {
    for (const auto* r : all) rep.accuracies[r->name] = arith_accuracy(*r);
  }
  bool adaptive = !subject.records.empty();
  for (const auto& r : subject.records) adaptive = adaptive && !r.grid.empty();
  if (adaptive) rep.temps = eval::temp_stats(subject.records, data::Tokenizer::kSep);
  rep.meta["subject"] = subject.name;
  rep.meta["prompts"] = subject.records.size();
  return rep;
}

double vote_accuracy(const lm::FastBase& base, const lm::FastHead* head,
                     const std::vector<data::TaskSample>& samples, const decoding::DecodingPolicy& policy, int n,
                     std::uint64_t seed, int workers) {
  if (n < 1) throw ContractError("vote_accuracy needs n >= 1");
  const auto runs = decoding::generate_many(base, head, samples, policy, n, seed, workers);
  double ok = 0;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].gold) continue;
    ok += eval::vote_correct(runs[i], *samples[i].gold);
    ++counted;
  }
  if (counted == 0) throw ContractError("vote_accuracy: no prompt carries a gold answer");
  return ok / static_cast<double>(counted);
}

}  // namespace adec::pipeline
