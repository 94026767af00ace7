#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "adec/data/tokenizer.hpp"
#include "adec/errors.hpp"
#include "adec/lm/checkpoint.hpp"
#include "adec/lpo/lpo.hpp"
#include "adec/pairs/pairs.hpp"
#include "adec/pipeline/config.hpp"
#include "adec/pipeline/run.hpp"
#include "adec/util/parallel.hpp"

namespace fs = std::filesystem;
using namespace adec;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string cache;
  std::string endpoint;
  int workers = 1;
  bool force = false;
  std::string split = "test";
  std::vector<std::string> policies;
};

struct Context {
  pipeline::ExperimentConfig cfg;
  Options opt;
  fs::path out;

  fs::path dir(const char* sub) const {
    auto p = out / sub;
    fs::create_directories(p);
    return p;
  }
  nlohmann::json header(const std::string& kind) const {
    return {{"kind", kind}, {"config_hash", cfg.hash()}, {"seed", cfg.seed}, {"name", cfg.name}};
  }
};

void log(const std::string& s) { std::cerr << s << '\n'; }

Context make_context(const Options& opt) {
  Context c;
  c.opt = opt;
  c.cfg = opt.config.empty() ? pipeline::ExperimentConfig{} : pipeline::load_experiment_config(opt.config);
  if (opt.config.empty()) c.cfg.model.vocab_size = data::tokenizer().vocab_size();
  c.cfg.validate();
  c.out = opt.out.empty() ? fs::path(c.cfg.out_dir) : fs::path(opt.out);
  return c;
}

void check_hash(const Context& c, const std::string& what, const std::string& hash) {
  if (hash == c.cfg.hash()) return;
  if (c.opt.force) {
    log("warning: " + what + " was produced by config " + hash + ", current is " + c.cfg.hash());
    return;
  }
  throw UsageError(what + " was produced by config " + hash + " but the current config hashes to " +
                   c.cfg.hash() + " (use --force to proceed)");
}

lm::BaseModel load_base(const Context& c) {
  const auto path = c.out / "checkpoints" / "base.adck";
  if (!fs::exists(path)) throw UsageError("missing " + path.string() + "; run `adec pretrain` first");
  auto ck = lm::load_checkpoint(path.string());
  check_hash(c, path.string(), ck.meta.config_hash);
  auto base = lm::base_from(ck);
  base.frozen = true;
  return base;
}

lm::AdaptiveHead load_head(const Context& c) {
  const auto path = c.out / "checkpoints" / "head.adck";
  if (!fs::exists(path)) throw UsageError("missing " + path.string() + "; run `adec train-lpo` first");
  auto ck = lm::load_checkpoint(path.string());
  check_hash(c, path.string(), ck.meta.config_hash);
  return lm::head_from(ck);
}

void cmd_pretrain(const Context& c) {
  auto base = pipeline::obtain_base(c.cfg.model, c.cfg.corpus, c.cfg.pretrain, c.opt.cache, log);
  const auto path = c.dir("checkpoints") / "base.adck";
  lm::save_checkpoint(path.string(),
                      lm::make_checkpoint(&base, nullptr, {c.cfg.pretrain.steps, c.cfg.seed, c.cfg.hash(), "base"}));
  log("wrote " + path.string());
}

void cmd_gen_pairs(const Context& c) {
  const auto base = load_base(c);
  const lm::FastBase fb(base);
  const auto head = lm::AdaptiveHead::init(c.cfg.model, c.cfg.seed);
  const lm::FastHead fh(head);
  const auto oracle = pipeline::make_oracle(c.cfg.oracle, c.opt.endpoint);
  const auto samples = pipeline::make_tasks(c.cfg.tasks, false);
  log("sampling " + std::to_string(c.cfg.n_per_prompt) + " responses for " + std::to_string(samples.size()) +
      " prompts");
  const auto ds = pairs::build_dataset(fb, fh, samples, c.cfg.n_per_prompt, c.cfg.pair_policy, oracle, c.cfg.seed,
                                       c.opt.workers);
  auto h = c.header("pairs");
  h["stats"] = {{"prompts", ds.stats.prompts},
                {"pairs", ds.stats.pairs},
                {"uninformative", ds.stats.uninformative},
                {"failed", ds.stats.failed}};
  const auto path = c.dir("pairs") / "pairs.jsonl";
  pairs::write_pairs(path.string(), ds.pairs, h);
  log("wrote " + std::to_string(ds.pairs.size()) + " pairs to " + path.string() + " (" +
      std::to_string(ds.stats.uninformative) + " uninformative, " + std::to_string(ds.stats.failed) + " failed)");
}

void cmd_train_lpo(const Context& c) {
  const auto base = load_base(c);
  const lm::FastBase fb(base);
  const auto path = c.out / "pairs" / "pairs.jsonl";
  if (!fs::exists(path)) throw UsageError("missing " + path.string() + "; run `adec gen-pairs` first");
  nlohmann::json header;
  const auto ps = pairs::read_pairs(path.string(), &header);
  check_hash(c, path.string(), header.value("config_hash", std::string{}));
  if (ps.empty()) throw UsageError(path.string() + " holds no pairs");
  const auto init = lm::AdaptiveHead::init(c.cfg.model, c.cfg.seed);
  const int every = std::max(1, c.cfg.loss.steps / 10);
  auto res = lpo::train(ps, init, fb, c.cfg.loss, c.opt.workers, [&](int step, const lpo::LossBreakdown& l) {
    if ((step + 1) % every == 0) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "  step %d loss %.4f margin %.4f", step + 1, l.total, l.margin);
      log(buf);
    }
  });
  const auto ck = c.dir("checkpoints") / "head.adck";
  lm::save_checkpoint(ck.string(), lm::make_checkpoint(nullptr, &res.head, {c.cfg.loss.steps, c.cfg.seed,
                                                                            c.cfg.hash(), "head"}));
  lpo::write_loss_curve((c.dir("reports") / "loss_curve.csv").string(), res.curve);
  log("wrote " + ck.string());
}

std::vector<decoding::DecodingPolicy> selected_policies(const Context& c) {
  std::vector<decoding::DecodingPolicy> out;
  const int max_new = c.cfg.eval_policy.max_new_tokens;
  if (c.opt.policies.empty()) {
    out.push_back(c.cfg.eval_policy);
    for (double t : c.cfg.baseline_temps()) out.push_back(decoding::DecodingPolicy::fixed(t, max_new));
    return out;
  }
  for (const auto& p : c.opt.policies) {
    if (p == "adaptive") {
      out.push_back(c.cfg.eval_policy);
    } else if (p.rfind("tau=", 0) == 0) {
      double t = 0;
      try {
        t = std::stod(p.substr(4));
      } catch (const std::exception&) {
        throw UsageError("bad policy '" + p + "'");
      }
      out.push_back(decoding::DecodingPolicy::fixed(t, max_new));
    } else {
      throw UsageError("policy must be 'adaptive' or 'tau=<value>', got '" + p + "'");
    }
  }
  return out;
}

void cmd_generate(const Context& c) {
  if (c.opt.split != "test" && c.opt.split != "train") throw UsageError("--split must be test or train");
  const auto base = load_base(c);
  const lm::FastBase fb(base);
  const auto policies = selected_policies(c);
  std::optional<lm::FastHead> fh;
  for (const auto& p : policies) {
    if (p.adaptive() && !fh) fh.emplace(load_head(c));
  }
  const auto samples = pipeline::make_tasks(c.cfg.tasks, c.opt.split == "test");
  const std::uint64_t seed = c.cfg.seed + 1;
  for (const auto& p : policies) {
    std::vector<decoding::GenerationRecord> recs(samples.size());
    parallel_for(samples.size(), c.opt.workers, [&](std::size_t i) {
      recs[i] = decoding::generate(fb, fh ? &*fh : nullptr, samples[i], p,
                                   decoding::StreamId{seed, static_cast<std::uint32_t>(i), 0});
    });
    auto h = c.header("records");
    h["policy"] = decoding::to_json(p);
    h["split"] = c.opt.split;
    const auto path = c.dir("records") / (pipeline::policy_label(p) + ".jsonl");
    decoding::write_records(path.string(), recs, h);
    log("wrote " + path.string());
  }
}

void cmd_eval(const Context& c) {
  const auto dir = c.out / "records";
  if (!fs::exists(dir)) throw UsageError("missing " + dir.string() + "; run `adec generate` first");
  std::map<std::string, std::vector<decoding::GenerationRecord>> runs;
  std::set<std::string> hashes;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".jsonl") continue;
    nlohmann::json h;
    runs[e.path().stem().string()] = decoding::read_records(e.path().string(), &h);
    hashes.insert(h.value("config_hash", std::string{}));
  }
  if (!runs.count("adaptive")) throw UsageError("no adaptive records in " + dir.string());
  if (hashes.size() > 1 && !c.opt.force) {
    throw UsageError("records in " + dir.string() + " come from " + std::to_string(hashes.size()) +
                     " different configs (use --force to compare anyway)");
  }
  for (const auto& h : hashes) check_hash(c, dir.string(), h);
  const auto oracle = pipeline::make_oracle(c.cfg.oracle, c.opt.endpoint);
  auto to_run = [&](const std::string& name) {
    pipeline::PolicyRun r;
    r.name = name;
    r.records = runs.at(name);
    r.scores = pipeline::score_all(oracle, r.records, c.opt.workers);
    return r;
  };
  const auto subject = to_run("adaptive");
  std::vector<pipeline::PolicyRun> baselines;
  for (const auto& [name, _] : runs) {
    if (name != "adaptive") baselines.push_back(to_run(name));
  }
  auto rep = pipeline::compare_policies(subject, baselines);
  rep.meta["config_hash"] = c.cfg.hash();
  rep.meta["seed"] = c.cfg.seed;
  rep.meta["name"] = c.cfg.name;
  if (c.cfg.vote_n > 0) {
    const auto base = load_base(c);
    const lm::FastBase fb(base);
    std::vector<data::TaskSample> arith;
    for (const auto& s : pipeline::make_tasks(c.cfg.tasks, true)) {
      if (s.tag == data::TaskTag::Arith) arith.push_back(s);
    }
    if (!arith.empty()) {
      const lm::FastHead fh(load_head(c));
      auto vote_policy = c.cfg.eval_policy;
      vote_policy.temp_selection = decoding::TempSelection::Sample;
      rep.accuracies["adaptive_vote"] =
          pipeline::vote_accuracy(fb, &fh, arith, vote_policy, c.cfg.vote_n, c.cfg.seed + 2, c.opt.workers);
    }
  }
  const auto rdir = c.dir("reports");
  eval::write_report((rdir / "report.json").string(), rep);
  eval::write_csv_tables(rdir.string(), rep);
  log("wrote " + (rdir / "report.json").string());
}

void cmd_report(const Context& c) {
  const auto rdir = c.out / "reports";
  const auto rep = eval::read_report((rdir / "report.json").string());
  check_hash(c, (rdir / "report.json").string(), rep.meta.value("config_hash", std::string{}));
  std::cout << "winrate of adaptive decoding (rows: task, columns: opponent)\n";
  for (const auto& [task, row] : rep.winrates) {
    std::cout << "  " << task << ':';
    for (const auto& [opp, w] : row) std::printf("  %s %.3f", opp.c_str(), w);
    std::cout << '\n';
  }
  if (!rep.accuracies.empty()) {
    std::cout << "arithmetic accuracy\n";
    for (const auto& [name, a] : rep.accuracies) std::printf("  %-14s %.3f\n", name.c_str(), a);
  }
  if (rep.temps) {
    const auto& t = *rep.temps;
    for (const auto& [task, mass] : t.histogram) {
      std::cout << "temperature use, " << task << ':';
      for (std::size_t k = 0; k < mass.size(); ++k) std::printf("  %g:%.2f", t.grid[k], mass[k]);
      std::cout << '\n';
      std::ofstream(rdir / ("hist_" + task + ".svg")) << eval::histogram_svg(task, t.grid, mass);
    }
    if (t.initial_count + t.other_count > 0) {
      std::printf("mean temperature: sentence-initial %.3f, other %.3f\n", t.initial_mean, t.other_mean);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive temperature decoding on a small character model"};
  app.require_subcommand(1);
  Options opt;
  auto common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opt.config, "experiment config JSON");
    sub->add_option("-o,--out", opt.out, "output directory (overrides out_dir)");
    sub->add_option("-w,--workers", opt.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--force", opt.force, "accept artifacts from a different config");
  };
  auto* pretrain = app.add_subcommand("pretrain", "pretrain or load the frozen base model");
  auto* gen_pairs = app.add_subcommand("gen-pairs", "sample responses and build preference pairs");
  auto* train_lpo = app.add_subcommand("train-lpo", "train the temperature head on the pairs");
  auto* generate = app.add_subcommand("generate", "decode test prompts with each policy");
  auto* evalc = app.add_subcommand("eval", "score records and write the comparison report");
  auto* report = app.add_subcommand("report", "print the report and write histograms");
  auto* run = app.add_subcommand("run", "every step in order");
  for (auto* s : {pretrain, gen_pairs, train_lpo, generate, evalc, report, run}) common(s);
  for (auto* s : {pretrain, run}) s->add_option("--cache", opt.cache, "directory for cached base models");
  for (auto* s : {gen_pairs, evalc, run}) s->add_option("--endpoint", opt.endpoint, "remote scoring endpoint");
  generate->add_option("--split", opt.split, "test or train prompts");
  generate->add_option("--policy", opt.policies, "adaptive or tau=<value>; default all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  try {
    const auto ctx = make_context(opt);
    if (pretrain->parsed()) cmd_pretrain(ctx);
    if (gen_pairs->parsed()) cmd_gen_pairs(ctx);
    if (train_lpo->parsed()) cmd_train_lpo(ctx);
    if (generate->parsed()) cmd_generate(ctx);
    if (evalc->parsed()) cmd_eval(ctx);
    if (report->parsed()) cmd_report(ctx);
    if (run->parsed()) {
      cmd_pretrain(ctx);
      cmd_gen_pairs(ctx);
      cmd_train_lpo(ctx);
      cmd_generate(ctx);
      cmd_eval(ctx);
      cmd_report(ctx);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
