// One PASS/FAIL line per acceptance criterion.
//
//   adec_acceptance [--only 1,5,6] [--cache DIR] [--out DIR] [--workers N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <memory>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adec/autodiff/grad_check.hpp"
#include "adec/data/tokenizer.hpp"
#include "adec/decoding/sampling.hpp"
#include "adec/errors.hpp"
#include "adec/eval/eval.hpp"
#include "adec/lpo/lpo.hpp"
#include "adec/pairs/pairs.hpp"
#include "adec/pipeline/config.hpp"
#include "adec/pipeline/run.hpp"
#include "adec/rewards/rewards.hpp"
#include "model_fixtures.hpp"
#include "oracles.hpp"
#include "primitive_cases.hpp"

using namespace adec;
namespace fs = std::filesystem;
using decoding::DecodingPolicy;
using decoding::TempSelection;
using decoding::Variant;

namespace {

struct Options {
  std::set<int> only;
  std::string cache = ADEC_ACCEPTANCE_CACHE;
  std::string out = ADEC_ACCEPTANCE_OUT;
  int workers = 1;
};

Options g_opt;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void note(const std::string& s) {
  std::fprintf(stderr, "    %s\n", s.c_str());
  std::fflush(stderr);
}

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------
// Shared desk-scale base model.

struct Desk {
  lm::BaseModel base;
  std::unique_ptr<lm::FastBase> fast;
};

Desk& desk() {
  static std::unique_ptr<Desk> d;
  if (!d) {
    const auto t0 = Clock::now();
    d = std::make_unique<Desk>();
    d->base = pipeline::obtain_base(pipeline::desk_model_config({0.0, 1.0}), pipeline::desk_corpus_config(),
                                    pipeline::desk_pretrain_config(), g_opt.cache, note);
    d->fast = std::make_unique<lm::FastBase>(d->base);
    note(fmt("base ready in %.0f s (not counted against any criterion)", since(t0)));
  }
  return *d;
}

struct Trained {
  lm::AdaptiveHead head;
  pairs::DatasetStats stats;
  double first_loss = 0, last_loss = 0;
};

Trained train_head(const std::vector<double>& grid, Variant variant, const std::vector<data::TaskSample>& train,
                   int n, lpo::LossConfig loss, std::uint64_t seed, int max_new = 64) {
  const auto& fb = *desk().fast;
  const auto cfg = pipeline::desk_model_config(grid);
  const auto head0 = lm::AdaptiveHead::init(cfg, seed);
  const lm::FastHead fh(head0);
  const rewards::Oracle oracle(rewards::OracleKind::Auto);
  const auto policy = DecodingPolicy::adaptive(variant, TempSelection::Sample, max_new);
  auto t0 = Clock::now();
  const auto ds = pairs::build_dataset(fb, fh, train, n, policy, oracle, seed, g_opt.workers);
  note(fmt("%zu pairs from %zu prompts (%zu uninformative) in %.0f s", ds.stats.pairs, ds.stats.prompts,
           ds.stats.uninformative, since(t0)));
  if (ds.pairs.empty()) throw ContractError("no informative pairs");
  t0 = Clock::now();
  loss.seed = seed;
  auto res = lpo::train(ds.pairs, head0, fb, loss, g_opt.workers);
  note(fmt("trained %d steps in %.0f s, loss %.4f -> %.4f", loss.steps, since(t0), res.curve.front().total,
           res.curve.back().total));
  return {std::move(res.head), ds.stats, res.curve.front().total, res.curve.back().total};
}

pipeline::PolicyRun run(const lm::FastHead* head, const std::vector<data::TaskSample>& samples,
                        const DecodingPolicy& policy, std::uint64_t seed, std::string name = "") {
  static const rewards::Oracle oracle(rewards::OracleKind::Auto);
  return pipeline::run_policy(*desk().fast, head, samples, policy, oracle, seed, g_opt.workers, std::move(name));
}

void save_report(const std::string& name, eval::EvalReport rep) {
  rep.meta["experiment"] = name;
  const auto dir = fs::path(g_opt.out) / name;
  fs::create_directories(dir);
  eval::write_report((dir / "report.json").string(), rep);
  eval::write_csv_tables(dir.string(), rep);
}

// ---------------------------------------------------------------------------
// Fixtures on a tiny random base for the analytic criteria.

struct TinyBench {
  lm::ModelConfig cfg = fixtures::tiny_config();
  lm::BaseModel model = lm::BaseModel::init(cfg, 31);
  lm::FastBase fast{model};
  lm::AdaptiveHead uniform = lm::AdaptiveHead::init(cfg, 6);
  lm::AdaptiveHead skewed = fixtures::perturbed_head(cfg, 6, 1.0f);

  // Pairs alternate sequence- and token-level records of unequal lengths.
  std::vector<pairs::PreferencePair> fixture(int n, int chosen_len = 16) {
    const auto samples = data::gen_mixed(n / 3, n / 3, n - 2 * (n / 3), 3);
    const lm::FastHead fh(skewed);
    std::vector<pairs::PreferencePair> out;
    for (int i = 0; i < n; ++i) {
      const auto v = i % 2 ? Variant::AdaptiveTok : Variant::AdaptiveSeq;
      const int rejected_len = std::max(1, chosen_len - 9 + i % 5);
      const auto sid = static_cast<std::uint32_t>(i);
      pairs::PreferencePair p;
      p.chosen = decoding::generate(fast, &fh, samples[i],
                                    DecodingPolicy::adaptive(v, TempSelection::Sample, chosen_len), {5, sid, 0});
      p.rejected = decoding::generate(fast, &fh, samples[i],
                                      DecodingPolicy::adaptive(v, TempSelection::Sample, rejected_len), {5, sid, 1});
      p.prompt_index = i;
      out.push_back(std::move(p));
    }
    return out;
  }
};

Outcome criterion1() {
  double prim64 = 0, prim32 = 0;
  std::size_t cases = 0;
  for (auto& c : support::primitive_cases<double>(101)) {
    prim64 = std::max(prim64, ad::grad_check(c.f, c.inputs, 1e-5).max_rel_error);
    ++cases;
  }
  for (auto& c : support::primitive_cases<float>(101)) {
    prim32 = std::max(prim32, ad::grad_check(c.f, c.inputs, 1e-3).max_rel_error);
  }

  // Short responses keep 32-bit round-off in the central differences below
  // the tolerance.
  TinyBench b;
  const auto pairs = b.fixture(2, 6);
  const auto seq = lpo::extract_features(b.fast, pairs[0]);
  const auto tok = lpo::extract_features(b.fast, pairs[1]);
  std::vector<std::string> names;
  for (const auto& [n, _] : b.skewed.params.all()) names.push_back(n);
  double loss64 = 0, loss32 = 0;
  auto check = [&]<class T>(const lpo::PairFeatures& pf, lpo::LossVariant v, double eps) {
    const auto bound = b.skewed.params.bind<T>(true);
    std::vector<ad::Tensor<T>> inputs;
    for (const auto& n : names) inputs.push_back(bound[n]);
    lpo::LossConfig cfg;
    cfg.variant = v;
    cfg.beta = 1.0;
    ad::ScalarFn<T> f = [&](ad::Tape<T>& tape, const std::vector<ad::Tensor<T>>& in) {
      ad::Bound<T> bb;
      for (std::size_t i = 0; i < names.size(); ++i) bb.put(names[i], in[i]);
      return lpo::pair_loss(tape, bb, pf, cfg);
    };
    return ad::grad_check<T>(f, inputs, eps).max_rel_error;
  };
  for (auto v : {lpo::LossVariant::JointTokens, lpo::LossVariant::TempTokensOnly, lpo::LossVariant::TempAsLatents,
                 lpo::LossVariant::NLLChosen}) {
    for (const auto* pf : {&seq, &tok}) {
      loss64 = std::max(loss64, check.operator()<double>(*pf, v, 1e-5));
      loss32 = std::max(loss32, check.operator()<float>(*pf, v, 1e-3));
    }
  }
  const bool ok = prim64 < 1e-5 && prim32 < 1e-3 && loss64 < 1e-5 && loss32 < 1e-3;
  return {ok, fmt("%zu primitives: max rel err %.1e (64-bit), %.1e (32-bit); 4 losses x seq/tok: %.1e, %.1e", cases,
                  prim64, prim32, loss64, loss32)};
}

Outcome criterion2() {
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int f = 0; f < 20; ++f) {
    const int v = std::uniform_int_distribution<int>(2, 10)(rng);
    const int k = std::uniform_int_distribution<int>(2, 6)(rng);
    std::vector<float> logits(v);
    std::normal_distribution<double> nd(0.0, 1.5);
    for (auto& x : logits) x = static_cast<float>(nd(rng));
    std::set<double> taus;
    if (f % 2 == 0) taus.insert(0.0);
    std::uniform_real_distribution<double> ut(0.05, 1.5);
    while (static_cast<int>(taus.size()) < k) taus.insert(std::round(ut(rng) * 100) / 100);
    const std::vector<double> grid(taus.begin(), taus.end());
    std::vector<double> p(k);
    std::gamma_distribution<double> gd(1.0, 1.0);
    double z = 0;
    for (auto& x : p) z += (x = gd(rng) + 1e-3);
    for (auto& x : p) x /= z;

    decoding::PhiloxStream trng(77, f, 0, decoding::StreamTag::Temperature);
    decoding::PhiloxStream krng(77, f, 0, decoding::StreamTag::Token);
    const int n = 100000;
    std::vector<double> emp(v, 0.0);
    for (int i = 0; i < n; ++i) {
      const auto c = decoding::select_temp_sample(p, grid, trng);
      emp[decoding::sample_token(logits, c.tau, krng).id] += 1.0 / n;
    }
    const auto mix = decoding::mixture_next_token_dist(logits, p, grid);
    double tv = 0;
    for (int i = 0; i < v; ++i) tv += std::abs(emp[i] - mix[i]);
    worst = std::max(worst, tv / 2);
  }
  return {worst < 0.01, fmt("20 fixtures, 1e5 draws each: max TV %.4f (limit 0.01)", worst)};
}

Outcome criterion3() {
  TinyBench b;
  const auto ps = b.fixture(50);
  double worst = 0;
  std::size_t unequal = 0;
  for (const auto& p : ps) {
    unequal += p.chosen.response.size() != p.rejected.response.size();
    for (double l : {lpo::loss_joint(p, b.uniform, b.fast, b.fast, 0.1).total,
                     lpo::loss_temp_only(p, b.uniform, b.fast, 0.1).total,
                     lpo::loss_latent(p, b.uniform, b.fast, 0.1).total}) {
      worst = std::max(worst, std::abs(l - std::log(2.0)));
    }
  }
  return {worst <= 1e-6, fmt("50 pairs (%zu of unequal length), 3 losses: max |L - ln 2| = %.1e", unequal, worst)};
}

Outcome criterion4() {
  TinyBench b;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> idx(0, b.cfg.grid_size() - 1);
  std::size_t identical = 0, total = 0, changed = 0;
  for (auto p : b.fixture(50)) {
    const auto before = lpo::loss_latent(p, b.skewed, b.fast, 0.1);
    const auto old_c = p.chosen.temp_index, old_r = p.rejected.temp_index;
    std::shuffle(p.chosen.temp_index.begin(), p.chosen.temp_index.end(), rng);
    for (auto& k : p.rejected.temp_index) k = idx(rng);
    changed += p.chosen.temp_index != old_c || p.rejected.temp_index != old_r;
    const auto after = lpo::loss_latent(p, b.skewed, b.fast, 0.1);
    identical += std::memcmp(&before.total, &after.total, sizeof(double)) == 0 &&
                 std::memcmp(&before.margin, &after.margin, sizeof(double)) == 0;
    ++total;
  }
  return {identical == total && changed > 0,
          fmt("%zu/%zu pairs bit-identical after shuffling indices (%zu actually changed)", identical, total, changed)};
}

// ---------------------------------------------------------------------------
// Experiments on the desk base.

Outcome criterion5() {
  const std::vector<double> grid{0.0, 0.1, 0.2, 0.4, 0.6};
  const auto train = data::gen_completion(160, 501);
  const auto test = data::gen_completion(100, 502);
  lpo::LossConfig loss;
  loss.steps = 200;
  loss.batch_size = 16;
  loss.learning_rate = 3e-3;
  const auto tr = train_head(grid, Variant::AdaptiveTok, train, 10, loss, 5);
  const lm::FastHead fh(tr.head);
  const auto adaptive = run(&fh, test, DecodingPolicy::adaptive(Variant::AdaptiveTok, TempSelection::Greedy), 55);
  const auto greedy = run(nullptr, test, DecodingPolicy::fixed(0.0), 55);
  auto repeat = [](const pipeline::PolicyRun& r) {
    double s = 0;
    for (const auto& rec : r.records) s += rewards::ngram_repeat_rate(rec.response_body(), 3);
    return s / static_cast<double>(r.records.size());
  };
  const double ra = repeat(adaptive), rg = repeat(greedy);
  std::size_t non_greedy = 0, tokens = 0;
  for (const auto& rec : adaptive.records) {
    for (int k : rec.temp_index) non_greedy += grid[k] > 0, ++tokens;
  }
  const double frac = static_cast<double>(non_greedy) / static_cast<double>(tokens);
  std::vector<pipeline::PolicyRun> baselines{greedy};
  for (double t : {0.1, 0.2, 0.4, 0.6}) baselines.push_back(run(nullptr, test, DecodingPolicy::fixed(t), 55));
  auto rep = pipeline::compare_policies(adaptive, baselines);
  rep.metrics["repeat3/adaptive"] = ra;
  for (const auto& b : baselines) rep.metrics["repeat3/" + b.name] = repeat(b);
  rep.metrics["non_greedy_token_fraction"] = frac;
  save_report("repeat", rep);
  const double rel = rg > 0 ? 1.0 - ra / rg : 0.0;
  return {rel >= 0.2 && frac > 0.5,
          fmt("3-gram repeat %.4f vs greedy %.4f (%.0f%% lower, need 20%%); non-greedy tokens %.1f%% (need > 50%%)",
              ra, rg, 100 * rel, 100 * frac)};
}

struct MixedResult {
  lm::AdaptiveHead head;
  std::vector<data::TaskSample> test;
};

const std::vector<double> kGrid6{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};

MixedResult& mixed_model() {
  static std::unique_ptr<MixedResult> m;
  if (!m) {
    const auto train = pipeline::make_tasks("mixed", 1200, 601);
    lpo::LossConfig loss;
    loss.steps = 600;
    loss.batch_size = 16;
    loss.learning_rate = 3e-3;
    auto tr = train_head(kGrid6, Variant::AdaptiveSeq, train, 16, loss, 6);
    m = std::make_unique<MixedResult>(MixedResult{std::move(tr.head), pipeline::make_tasks("mixed", 400, 602)});
  }
  return *m;
}

// Winrates against every fixed temperature, averaged over the three subtasks.
std::pair<bool, std::string> beats_every_fixed(const pipeline::PolicyRun& subject,
                                               const std::vector<pipeline::PolicyRun>& fixed, eval::EvalReport& rep) {
  rep = pipeline::compare_policies(subject, fixed);
  bool ok = true;
  std::ostringstream os;
  for (const auto& b : fixed) {
    const double w = rep.average_winrate(b.name);
    ok = ok && w > 0.5;
    os << ' ' << b.name << ':' << fmt("%.3f", w);
  }
  return {ok, os.str()};
}

std::vector<pipeline::PolicyRun> fixed_runs(const std::vector<data::TaskSample>& test, std::uint64_t seed) {
  std::vector<pipeline::PolicyRun> out;
  for (double t : kGrid6) out.push_back(run(nullptr, test, DecodingPolicy::fixed(t), seed));
  return out;
}

Outcome criterion6() {
  auto& m = mixed_model();
  const lm::FastHead fh(m.head);
  const auto adaptive = run(&fh, m.test, DecodingPolicy::adaptive(Variant::AdaptiveSeq, TempSelection::Greedy), 66);
  std::size_t arith = 0, arith_min = 0, diverse = 0, diverse_high = 0;
  for (const auto& rec : adaptive.records) {
    const double tau = rec.grid[rec.temp_index.at(0)];
    if (rec.task == data::TaskTag::Arith) arith_min += tau == kGrid6.front(), ++arith;
    if (rec.task == data::TaskTag::Diverse) diverse_high += tau > 0.5, ++diverse;
  }
  eval::EvalReport rep;
  const auto [beats, detail] = beats_every_fixed(adaptive, fixed_runs(m.test, 66), rep);
  save_report("mixed_greedy", rep);
  const double fa = static_cast<double>(arith_min) / arith, fd = static_cast<double>(diverse_high) / diverse;
  return {fa >= 0.9 && fd >= 0.9 && beats,
          fmt("arith at min temperature %.0f%% (need 90%%), diverse above median %.0f%% (need 90%%); avg winrate",
              100 * fa, 100 * fd) +
              detail};
}

Outcome criterion7() {
  const auto train = data::gen_constrained(300, 701);
  const auto test = data::gen_constrained(150, 702);
  lpo::LossConfig loss;
  loss.steps = 300;
  loss.batch_size = 16;
  loss.learning_rate = 3e-3;
  const auto tr = train_head(kGrid6, Variant::AdaptiveTok, train, 16, loss, 7);
  const lm::FastHead fh(tr.head);
  const auto adaptive = run(&fh, test, DecodingPolicy::adaptive(Variant::AdaptiveTok, TempSelection::Greedy), 77);
  const auto stats = eval::temp_stats(adaptive.records, data::Tokenizer::kSep);
  std::vector<pipeline::PolicyRun> fixed{run(nullptr, test, DecodingPolicy::fixed(kGrid6.front()), 77),
                                         run(nullptr, test, DecodingPolicy::fixed(kGrid6.back()), 77)};
  auto rep = pipeline::compare_policies(adaptive, fixed);
  save_report("constrained", rep);
  const auto& row = rep.winrates.at("constrained");
  const double w0 = row.at(fixed[0].name), w1 = row.at(fixed[1].name);
  const double gap = stats.other_mean - stats.initial_mean;
  return {gap >= 0.1 && w0 > 0.5 && w1 > 0.5,
          fmt("mean temperature sentence-initial %.3f vs elsewhere %.3f (gap %.3f, need 0.1); winrate vs %s %.3f, "
              "vs %s %.3f",
              stats.initial_mean, stats.other_mean, gap, fixed[0].name.c_str(), w0, fixed[1].name.c_str(), w1)};
}

Outcome criterion8() {
  const std::vector<double> grid{0.0, 0.4, 0.8, 1.0};
  const auto train = data::gen_arith(300, 801);
  const auto test = data::gen_arith(200, 802);
  lpo::LossConfig loss;
  loss.steps = 300;
  loss.batch_size = 16;
  loss.learning_rate = 3e-3;
  const auto tr = train_head(grid, Variant::AdaptiveTok, train, 16, loss, 8);
  const lm::FastHead fh(tr.head);
  const auto& fb = *desk().fast;
  const auto single = run(&fh, test, DecodingPolicy::adaptive(Variant::AdaptiveTok, TempSelection::Greedy), 88);
  const double single_acc = pipeline::arith_accuracy(single);
  const double vote = pipeline::vote_accuracy(fb, &fh, test,
                                              DecodingPolicy::adaptive(Variant::AdaptiveTok, TempSelection::Sample), 8,
                                              89, g_opt.workers);
  const std::vector<data::TaskSample> pick(train.begin(), train.begin() + 150);
  double best_tau = 0, best_train = -1;
  eval::EvalReport rep;
  for (double t : grid) {
    const double a = pipeline::vote_accuracy(fb, nullptr, pick, DecodingPolicy::fixed(t), 8, 90, g_opt.workers);
    rep.metrics[fmt("train_vote8/tau=%g", t)] = a;
    if (a > best_train) best_train = a, best_tau = t;
  }
  const double fixed_vote = pipeline::vote_accuracy(fb, nullptr, test, DecodingPolicy::fixed(best_tau), 8, 89,
                                                    g_opt.workers);
  rep.accuracies["adaptive_greedy_single"] = single_acc;
  rep.accuracies["adaptive_vote8"] = vote;
  rep.accuracies[fmt("tau=%g_vote8", best_tau)] = fixed_vote;
  save_report("voting", rep);
  return {vote >= single_acc && vote >= fixed_vote - 0.02,
          fmt("vote-of-8 %.3f vs single greedy %.3f; best fixed on train tau=%g, its test vote-of-8 %.3f", vote,
              single_acc, best_tau, fixed_vote)};
}

Outcome criterion9() {
  // Five contexts share one preference pattern over the grid {a, b, c}:
  // six pairs a > c and four pairs b > a. The chosen temperature is most
  // often a, while the margins rank b above a.
  const std::vector<double> grid{0.0, 0.5, 1.0};
  auto cfg = pipeline::desk_model_config(grid);
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.head_hidden = 16;
  const auto head0 = lm::AdaptiveHead::init(cfg, 9);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  std::vector<std::vector<float>> contexts(5, std::vector<float>(cfg.d_model));
  for (auto& c : contexts) {
    for (auto& x : c) x = static_cast<float>(nd(rng));
  }
  auto rec = [&](const std::vector<float>& h, int k) {
    lpo::RecordFeatures f;
    f.d_model = cfg.d_model;
    f.k = 3;
    f.per_token = false;
    f.hidden.assign(h.begin(), h.end());
    f.latent_hidden = f.hidden;
    f.temp_index = {k};
    f.token_q = {0.3, 0.3, 0.3};
    f.word_logprob = {std::log(0.3)};
    f.ref_word_logprob = f.word_logprob;
    return f;
  };
  std::vector<lpo::PairFeatures> feats;
  for (const auto& h : contexts) {
    for (int i = 0; i < 6; ++i) feats.push_back({rec(h, 0), rec(h, 2)});
    for (int i = 0; i < 4; ++i) feats.push_back({rec(h, 1), rec(h, 0)});
  }
  auto trained = [&](lpo::LossVariant v) {
    lpo::LossConfig c;
    c.variant = v;
    c.beta = 0.5;
    c.steps = 400;
    c.batch_size = 10;
    c.learning_rate = 1e-2;
    return lpo::train(feats, head0, c).head;
  };
  const lm::AdaptiveHead lpo_head = trained(lpo::LossVariant::TempTokensOnly);
  const lm::AdaptiveHead nll_head = trained(lpo::LossVariant::NLLChosen);
  int lpo_b = 0, nll_a = 0;
  for (const auto& h : contexts) {
    lpo_b += decoding::select_temp_greedy(lm::temp_distribution(lpo_head, h), grid).index == 1;
    nll_a += decoding::select_temp_greedy(lm::temp_distribution(nll_head, h), grid).index == 0;
  }
  return {lpo_b == 5 && nll_a == 5,
          fmt("greedy selection picks the margin-preferred temperature under LPO in %d/5 contexts and the "
              "frequency mode under NLL in %d/5",
              lpo_b, nll_a)};
}

Outcome criterion10() {
  auto& m = mixed_model();
  const lm::FastHead fh(m.head);
  const auto fixed = fixed_runs(m.test, 66);
  const auto greedy = run(&fh, m.test, DecodingPolicy::adaptive(Variant::AdaptiveSeq, TempSelection::Greedy), 66,
                          "adaptive_greedy");
  const auto sampled = run(&fh, m.test, DecodingPolicy::adaptive(Variant::AdaptiveSeq, TempSelection::Sample), 66,
                           "adaptive_sampled");
  eval::EvalReport rg, rs;
  const auto [g_ok, g_detail] = beats_every_fixed(greedy, fixed, rg);
  const auto [s_ok, s_detail] = beats_every_fixed(sampled, fixed, rs);
  save_report("mixed_sampled", rs);

  // Modal temperature of 16 sampled selections per prompt against the greedy choice.
  const int draws = 16;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < m.test.size(); ++i) {
    std::vector<int> counts(kGrid6.size(), 0);
    const auto h = desk().fast->hidden_all(m.test[i].prompt);
    const auto p = fh.probs(std::span<const float>(h).subspan(h.size() - desk().fast->config().d_model));
    for (int j = 0; j < draws; ++j) {
      decoding::PhiloxStream trng(1010, static_cast<std::uint32_t>(i), j, decoding::StreamTag::Temperature);
      ++counts[decoding::select_temp_sample(p, kGrid6, trng).index];
    }
    const int mode = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    agree += mode == greedy.records[i].temp_index.at(0);
  }
  const double fa = static_cast<double>(agree) / static_cast<double>(m.test.size());
  return {g_ok && s_ok && fa >= 0.8, "greedy selection:" + g_detail + "; sampled selection:" + s_detail +
                                         fmt("; modal agreement %.0f%% (need 80%%)", 100 * fa)};
}

Outcome criterion11() {
  std::mt19937_64 rng(11);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + t % 37;
    const auto a = oracles::coarse_values(rng, n, 3), b = oracles::coarse_values(rng, n, 3);
    const auto ra = oracles::coarse_values(rng, n, 2), rb = oracles::coarse_values(rng, n, 2);
    std::vector<bool> ca(n), cb(n);
    std::vector<std::pair<double, double>> pa(n), pb(n);
    for (std::size_t i = 0; i < n; ++i) {
      ca[i] = a[i] > 0.5, cb[i] = b[i] > 0.5;
      pa[i] = {ra[i], a[i]}, pb[i] = {rb[i], b[i]};
    }
    worst = std::max({worst, std::abs(eval::winrate_correctness(ca, cb) + eval::winrate_correctness(cb, ca) - 1),
                      std::abs(eval::winrate_score(a, b) + eval::winrate_score(b, a) - 1),
                      std::abs(eval::winrate_constrained(pa, pb) + eval::winrate_constrained(pb, pa) - 1),
                      std::abs(eval::winrate_score(a, b) - oracles::winrate(a, b)),
                      std::abs(eval::winrate_constrained(pa, pb) - oracles::winrate(pa, pb))});
  }
  std::size_t match = 0, a5_informative = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 8 + t % 9;
    const auto rm = oracles::coarse_values(rng, n, 4), rate = oracles::coarse_values(rng, n, 3);
    const auto gs = pairs::choose_by_score(rm);
    const auto ws = oracles::pair_by_score(rm);
    const auto gc = pairs::choose_constrained(rm, rate);
    const auto wc = oracles::pair_constrained(rm, rate);
    bool ok = gs.has_value() == ws.has_value() && gc.has_value() == wc.has_value();
    if (ok && gs) ok = gs->chosen == ws->chosen && gs->rejected == ws->rejected;
    if (ok && gc) ok = gc->chosen == wc->chosen && gc->rejected == wc->rejected, ++a5_informative;
    match += ok;
  }
  return {worst < 1e-12 && match == 1000,
          fmt("symmetry and oracle deviation %.1e over 1000 fixtures; pair builders match the oracle on %zu/1000 "
              "(%zu informative constrained cases)",
              worst, match, a5_informative)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 means no runtime limit
  std::function<Outcome()> fn;
};

}  // namespace

int main(int argc, char** argv) {
  if (const char* c = std::getenv("ADEC_CACHE")) g_opt.cache = c;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "%s needs a value\n", a.c_str());
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--only") {
      std::stringstream ss(value());
      for (std::string tok; std::getline(ss, tok, ',');) g_opt.only.insert(std::stoi(tok));
    } else if (a == "--cache") {
      g_opt.cache = value();
    } else if (a == "--out") {
      g_opt.out = value();
    } else if (a == "--workers") {
      g_opt.workers = std::stoi(value());
    } else {
      std::fprintf(stderr, "unknown argument %s\n", a.c_str());
      return 2;
    }
  }

  const std::vector<Criterion> all{
      {1, "gradient correctness", 60, criterion1},
      {2, "two-stage sampling matches the mixture", 60, criterion2},
      {3, "preference losses are ln 2 at a uniform head", 0, criterion3},
      {4, "latent loss ignores temperature indices", 0, criterion4},
      {5, "repeat reduction on completion", 15 * 60, criterion5},
      {6, "multi-task temperature adaptation", 30 * 60, criterion6},
      {7, "positional adaptation under a constraint", 0, criterion7},
      {8, "majority voting", 0, criterion8},
      {9, "LPO against the NLL baseline", 0, criterion9},
      {10, "greedy and sampled temperature selection", 0, criterion10},
      {11, "winrate and pair-builder protocol", 0, criterion11},
  };
  int failed = 0;
  for (const auto& c : all) {
    if (!g_opt.only.empty() && !g_opt.only.count(c.id)) continue;
    if (c.id >= 5 && c.id <= 8) desk();
    if (c.id == 10) desk();
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = since(t0);
    if (c.budget_s > 0 && secs > c.budget_s) {
      o.pass = false;
      o.detail += fmt("; over the %.0f s budget", c.budget_s);
    }
    failed += !o.pass;
    std::printf("[%s] criterion %2d  %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
