#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "adec/autodiff/grad_check.hpp"
#include "adec/decoding/sampling.hpp"
#include "adec/errors.hpp"
#include "adec/lpo/lpo.hpp"
#include "fixtures.hpp"

using namespace adec;
using namespace adec::lpo;
using decoding::TempSelection;
using decoding::Variant;

namespace {

struct Bench {
  lm::ModelConfig cfg = fixtures::tiny_config();
  lm::BaseModel model = lm::BaseModel::init(cfg, 31);
  lm::FastBase fast{model};
  lm::AdaptiveHead uniform = lm::AdaptiveHead::init(cfg, 6);
  lm::AdaptiveHead skewed = fixtures::perturbed_head(cfg, 6, 1.0f);

  decoding::GenerationRecord sample(const data::TaskSample& s, Variant v, std::uint32_t j, int max_new = 16) {
    lm::FastHead fh(skewed);
    return decoding::generate(fast, &fh, s, decoding::DecodingPolicy::adaptive(v, TempSelection::Sample, max_new),
                              {5, 0, j});
  }

  pairs::PreferencePair pair(const data::TaskSample& s, Variant v, std::uint32_t j) {
    pairs::PreferencePair p;
    p.chosen = sample(s, v, j, 16);
    p.rejected = sample(s, v, j + 1000, 9);
    return p;
  }

  // Mixed-variant fixture with unequal response lengths.
  std::vector<pairs::PreferencePair> fixture(int n) {
    const auto samples = data::gen_mixed(n / 2, n - n / 2, 0, 3);
    std::vector<pairs::PreferencePair> out;
    for (int i = 0; i < n; ++i) out.push_back(pair(samples[i], i % 2 ? Variant::AdaptiveTok : Variant::AdaptiveSeq, i));
    return out;
  }
};

LossConfig config_for(LossVariant v, double beta = 0.1) {
  LossConfig c;
  c.variant = v;
  c.beta = beta;
  return c;
}

double softplus_neg(double x) { return std::log1p(std::exp(-x)); }

}  // namespace

TEST_CASE("temperature log-probability under a uniform head") {
  Bench b;
  const auto s = data::gen_arith(1, 2)[0];
  const double k = b.cfg.grid_size();
  const auto seq = b.sample(s, Variant::AdaptiveSeq, 0);
  CHECK(temp_seq_logprob(b.uniform, b.fast, seq) == doctest::Approx(std::log(1 / k)).epsilon(1e-12));
  const auto tok = b.sample(s, Variant::AdaptiveTok, 0);
  CHECK(temp_seq_logprob(b.uniform, b.fast, tok) ==
        doctest::Approx(tok.response.size() * std::log(1 / k)).epsilon(1e-12));
  auto fixed = decoding::generate(b.fast, nullptr, s, decoding::DecodingPolicy::fixed(0.5, 8), {1, 0, 0});
  CHECK_THROWS_AS(temp_seq_logprob(b.uniform, b.fast, fixed), ContractError);
}

TEST_CASE("every preference loss is ln 2 at a uniform head") {
  Bench b;
  for (const auto& p : b.fixture(12)) {
    CHECK(loss_temp_only(p, b.uniform, b.fast, 0.1).total == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(loss_joint(p, b.uniform, b.fast, b.fast, 0.1).total == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(loss_latent(p, b.uniform, b.fast, 0.1).total == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }
}

TEST_CASE("without the temperature reference, unequal lengths shift the margin") {
  Bench b;
  const auto s = data::gen_diverse(1, 1)[0];
  const auto p = b.pair(s, Variant::AdaptiveTok, 0);
  REQUIRE(p.chosen.response.size() != p.rejected.response.size());
  const auto r = loss_temp_only(p, b.uniform, b.fast, 1.0, false);
  const double want = (static_cast<double>(p.chosen.response.size()) - p.rejected.response.size()) *
                      std::log(1.0 / b.cfg.grid_size());
  CHECK(r.margin == doctest::Approx(want).epsilon(1e-9));
}

TEST_CASE("loss breakdown obeys the sigmoid identity") {
  Bench b;
  CHECK(softplus_neg(1.0) == doctest::Approx(0.313262).epsilon(1e-6));
  ad::Tape<double> tape;
  CHECK(tape.neg_log_sigmoid(ad::Tensor<double>::scalar(1.0)).item() == doctest::Approx(0.3132616875).epsilon(1e-9));
  for (const auto& p : b.fixture(8)) {
    for (double beta : {0.1, 1.0, 3.0}) {
      for (auto v : {LossVariant::TempTokensOnly, LossVariant::JointTokens, LossVariant::TempAsLatents}) {
        const auto r = evaluate(extract_features(b.fast, p), b.skewed, config_for(v, beta));
        CHECK(std::abs(r.total - softplus_neg(beta * r.margin)) < 1e-6);
        CHECK(std::abs(r.margin - (r.chosen_term - r.rejected_term)) < 1e-9);
      }
    }
  }
}

TEST_CASE("joint loss equals temperature-only loss with the base as reference") {
  Bench b;
  for (const auto& p : b.fixture(8)) {
    const auto a = loss_temp_only(p, b.skewed, b.fast, 0.5);
    const auto j = loss_joint(p, b.skewed, b.fast, b.fast, 0.5);
    CHECK(std::abs(a.total - j.total) < 1e-6);
  }
  // A different reference base changes the word ratio terms.
  const auto other = lm::BaseModel::init(b.cfg, 99);
  lm::FastBase of(other);
  const auto p = b.fixture(2)[1];
  CHECK(std::abs(loss_joint(p, b.skewed, b.fast, of, 0.5).total - loss_temp_only(p, b.skewed, b.fast, 0.5).total) >
        1e-4);
}

TEST_CASE("latent loss ignores the recorded temperature indices") {
  Bench b;
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> idx(0, b.cfg.grid_size() - 1);
  for (auto p : b.fixture(10)) {
    const auto before = loss_latent(p, b.skewed, b.fast, 0.1);
    for (auto& k : p.chosen.temp_index) k = idx(rng);
    std::shuffle(p.rejected.temp_index.begin(), p.rejected.temp_index.end(), rng);
    for (auto& k : p.rejected.temp_index) k = idx(rng);
    const auto after = loss_latent(p, b.skewed, b.fast, 0.1);
    CHECK(std::memcmp(&before.total, &after.total, sizeof(double)) == 0);
    CHECK(std::memcmp(&before.margin, &after.margin, sizeof(double)) == 0);
  }
}

TEST_CASE("latent loss with a single temperature is ln 2") {
  // Configured grids need two entries, so the one-temperature head and its
  // features are assembled by hand.
  const auto cfg = fixtures::tiny_config();
  auto head = lm::AdaptiveHead::init(cfg, 1);
  RecordFeatures f;
  f.d_model = cfg.d_model;
  f.k = 1;
  f.per_token = true;
  f.temp_index = {0, 0, 0};
  f.hidden.assign(3 * cfg.d_model, 0.25);
  f.latent_hidden = f.hidden;
  f.token_q = {0.2, 0.5, 0.9};
  f.word_logprob = {std::log(0.2), std::log(0.5), std::log(0.9)};
  f.ref_word_logprob = f.word_logprob;
  PairFeatures pf{f, f};
  pf.rejected.token_q = {0.01, 0.7, 0.3};
  auto& b3 = head.params.get_mut("head.b3");
  b3.shape = {1};
  b3.data = {2.0f};
  auto& w3 = head.params.get_mut("head.w3");
  w3.shape = {static_cast<std::size_t>(cfg.head_hidden), 1};
  w3.data.assign(cfg.head_hidden, 0.3f);
  head.grid = {0.7};
  CHECK(evaluate(pf, head, config_for(LossVariant::TempAsLatents)).total ==
        doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("latent margin matches brute-force marginalization on a two-token vocabulary") {
  lm::ModelConfig cfg;
  cfg.vocab_size = 2;
  cfg.d_model = 2;
  cfg.n_heads = 1;
  cfg.n_layers = 1;
  cfg.ctx_len = 8;
  cfg.head_hidden = 3;
  cfg.temperature_grid = {0.0, 0.8};
  auto head = lm::AdaptiveHead::init(cfg, 12);
  head.params.get_mut("head.w3").data = {0.9f, -0.4f, 0.3f, 0.2f, -1.1f, 0.5f};
  head.params.get_mut("head.b3").data = {0.1f, -0.2f};

  // Hand-set logits per position, token choices, hidden states.
  const std::vector<std::array<double, 2>> logits{{0.3, 1.1}, {-0.5, 0.2}, {2.0, 1.9}};
  const std::vector<std::array<double, 2>> hid{{0.5, -1.0}, {1.5, 0.25}, {-0.7, 0.9}};
  const std::vector<int> yc{1, 0, 0}, yr{0, 0, 1};

  auto q = [&](std::size_t t, double tau, int y) {
    const auto& l = logits[t];
    if (tau == 0) return (l[1] > l[0] ? 1 : 0) == y ? 1.0 : 0.0;
    const double z0 = std::exp(l[0] / tau), z1 = std::exp(l[1] / tau);
    return (y == 0 ? z0 : z1) / (z0 + z1);
  };
  auto silu = [](double x) { return x / (1 + std::exp(-x)); };
  auto head_probs = [&](const std::array<double, 2>& h) {
    const auto& P = head.params;
    auto W = [&](const char* n, std::size_t i) { return static_cast<double>(P.get(n).data[i]); };
    std::vector<double> a(3), b(3), z(2);
    for (int j = 0; j < 3; ++j) a[j] = silu(h[0] * W("head.w1", 0 * 3 + j) + h[1] * W("head.w1", 1 * 3 + j) + W("head.b1", j));
    for (int j = 0; j < 3; ++j) {
      double s = W("head.b2", j);
      for (int i = 0; i < 3; ++i) s += a[i] * W("head.w2", i * 3 + j);
      b[j] = silu(s);
    }
    for (int k = 0; k < 2; ++k) {
      double s = W("head.b3", k);
      for (int i = 0; i < 3; ++i) s += b[i] * W("head.w3", i * 2 + k);
      z[k] = s;
    }
    const double m = std::max(z[0], z[1]);
    const double e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
    return std::array<double, 2>{e0 / (e0 + e1), e1 / (e0 + e1)};
  };
  auto seq_ratio = [&](const std::vector<int>& y) {
    double s = 0;
    for (std::size_t t = 0; t < y.size(); ++t) {
      const auto p = head_probs(hid[t]);
      double mix = 0, ref = 0;
      for (int k = 0; k < 2; ++k) {
        mix += p[k] * q(t, cfg.temperature_grid[k], y[t]);
        ref += 0.5 * q(t, cfg.temperature_grid[k], y[t]);
      }
      s += std::log(std::max(mix, 1e-8)) - std::log(std::max(ref, 1e-8));
    }
    return s;
  };
  const double oracle_margin = seq_ratio(yc) - seq_ratio(yr);

  auto features = [&](const std::vector<int>& y) {
    RecordFeatures f;
    f.d_model = 2;
    f.k = 2;
    f.per_token = true;
    for (std::size_t t = 0; t < y.size(); ++t) {
      f.hidden.insert(f.hidden.end(), hid[t].begin(), hid[t].end());
      f.temp_index.push_back(static_cast<int>(t % 2));
      for (double tau : cfg.temperature_grid) f.token_q.push_back(q(t, tau, y[t]));
      f.word_logprob.push_back(0);
    }
    f.latent_hidden = f.hidden;
    f.ref_word_logprob = f.word_logprob;
    return f;
  };
  const PairFeatures pf{features(yc), features(yr)};
  const auto r = evaluate(pf, head, config_for(LossVariant::TempAsLatents, 1.0));
  CHECK(std::abs(r.margin - oracle_margin) < 1e-6);
  CHECK(std::abs(oracle_margin) > 1e-3);
}

TEST_CASE("loss gradients on head parameters pass grad_check") {
  Bench b;
  const auto pairs = b.fixture(2);
  const auto tok = extract_features(b.fast, pairs[1]);
  const auto seq = extract_features(b.fast, pairs[0]);
  std::vector<std::string> names;
  for (const auto& [n, _] : b.skewed.params.all()) names.push_back(n);
  auto run = [&]<class T>(const PairFeatures& pf, LossVariant v, double eps, double tol) {
    const auto bound = b.skewed.params.bind<T>(true);
    std::vector<ad::Tensor<T>> inputs;
    for (const auto& n : names) inputs.push_back(bound[n]);
    const auto cfg = config_for(v, 1.0);
    ad::ScalarFn<T> f = [&](ad::Tape<T>& tape, const std::vector<ad::Tensor<T>>& in) {
      ad::Bound<T> bb;
      for (std::size_t i = 0; i < names.size(); ++i) bb.put(names[i], in[i]);
      return pair_loss(tape, bb, pf, cfg);
    };
    const auto r = ad::grad_check<T>(f, inputs, eps);
    CHECK(r.max_rel_error < tol);
  };
  for (auto v : {LossVariant::TempTokensOnly, LossVariant::JointTokens, LossVariant::TempAsLatents,
                 LossVariant::NLLChosen}) {
    CAPTURE(to_string(v));
    for (const auto* pf : {&seq, &tok}) {
      run.operator()<double>(*pf, v, 1e-5, 1e-5);
      run.operator()<float>(*pf, v, 1e-3, 1e-3);
    }
  }
}

TEST_CASE("sigma monotonicity in the chosen temperature") {
  Bench b;
  auto p = b.pair(data::gen_arith(1, 9)[0], Variant::AdaptiveSeq, 0);
  p.chosen.temp_index = {0};
  p.rejected.temp_index = {2};
  const auto pf = extract_features(b.fast, p);
  auto head = b.skewed;
  double prev = INFINITY;
  for (int i = 0; i < 20; ++i) {
    const double loss = evaluate(pf, head, config_for(LossVariant::TempTokensOnly, 1.0)).total;
    CHECK(loss <= prev);
    prev = loss;
    head.params.get_mut("head.b3").data[0] += 0.25f;
  }
}

TEST_CASE("one step moves probability toward the chosen temperature") {
  Bench b;
  auto p = b.pair(data::gen_diverse(1, 4)[0], Variant::AdaptiveSeq, 0);
  p.chosen.temp_index = {1};
  p.rejected.temp_index = {2};
  const std::vector<PairFeatures> feats{extract_features(b.fast, p)};
  auto cfg = config_for(LossVariant::TempTokensOnly);
  cfg.steps = 1;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-2;
  const auto trained = train(feats, b.skewed, cfg).head;
  std::vector<float> h(feats[0].chosen.hidden.begin(), feats[0].chosen.hidden.end());
  const auto before = lm::temp_distribution(b.skewed, h), after = lm::temp_distribution(trained, h);
  CHECK(after[1] > before[1]);
  CHECK(after[2] < before[2]);
}

TEST_CASE("nll baseline") {
  Bench b;
  const auto s = data::gen_arith(1, 5)[0];
  std::vector<decoding::GenerationRecord> recs;
  for (int j = 0; j < 10; ++j) recs.push_back(b.sample(s, Variant::AdaptiveSeq, j));
  CHECK(loss_nll_chosen(recs, b.uniform, b.fast) == doctest::Approx(std::log(b.cfg.grid_size())).epsilon(1e-12));
  CHECK_THROWS_AS(loss_nll_chosen({}, b.uniform, b.fast), ContractError);

  // Chosen temperatures 60% index 1, 40% index 0 at one prompt.
  auto cfg2 = b.cfg;
  cfg2.temperature_grid = {0.2, 0.9};
  auto head = lm::AdaptiveHead::init(cfg2, 3);
  std::vector<PairFeatures> feats;
  for (int j = 0; j < 10; ++j) {
    auto r = recs[j];
    r.grid = cfg2.temperature_grid;
    r.temp_index = {j < 6 ? 1 : 0};
    pairs::PreferencePair p{r, r, {}, {}, 0};
    feats.push_back(extract_features(b.fast, p));
  }
  auto cfg = config_for(LossVariant::NLLChosen);
  cfg.steps = 400;
  cfg.batch_size = 10;
  cfg.learning_rate = 1e-2;
  const auto res = train(feats, head, cfg);
  std::vector<float> h(feats[0].chosen.hidden.begin(), feats[0].chosen.hidden.end());
  const auto p = lm::temp_distribution(res.head, h);
  CHECK(std::abs(p[1] - 0.6) < 0.05);
  CHECK(std::abs(p[0] - 0.4) < 0.05);
}

TEST_CASE("training contracts") {
  Bench b;
  const auto pairs = b.fixture(6);
  auto cfg = config_for(LossVariant::TempTokensOnly);
  cfg.steps = 0;
  CHECK(train(pairs, b.skewed, b.fast, cfg).head.params.bit_equal(b.skewed.params));
  cfg.steps = 5;
  cfg.batch_size = 3;
  const auto base_before = b.model.params;
  const auto a = train(pairs, b.skewed, b.fast, cfg, 1);
  const auto c = train(pairs, b.skewed, b.fast, cfg, 3);
  CHECK(a.head.params.bit_equal(c.head.params));
  CHECK_FALSE(a.head.params.bit_equal(b.skewed.params));
  CHECK(b.model.params.bit_equal(base_before));
  CHECK(a.curve.size() == 5);

  ad::GradAccum g(b.skewed.params);
  std::vector<std::size_t> batch{0, 1};
  std::vector<PairFeatures> feats;
  for (const auto& p : pairs) feats.push_back(extract_features(b.fast, p));
  batch_gradient(feats, batch, b.skewed, cfg, g);
  for (const auto& [name, _] : g.all()) CHECK(name.rfind("head.", 0) == 0);

  auto broken = feats;
  broken[0].chosen.hidden[0] = NAN;
  cfg.steps = 1;
  cfg.batch_size = 6;
  CHECK_THROWS_AS(train(broken, b.skewed, cfg), NumericError);
  CHECK_THROWS_AS(config_for(LossVariant::TempTokensOnly, 0.0).validate(), UsageError);
  auto j = to_json(cfg);
  CHECK(loss_config_from_json(j).steps == 1);
  j["gamma"] = 1;
  CHECK_THROWS_AS(loss_config_from_json(j), UsageError);
}

TEST_CASE("two clusters learn opposite temperatures") {
  Bench b;
  const int K = b.cfg.grid_size();
  auto make = [&](const std::vector<data::TaskSample>& ss, int good, int bad, std::uint32_t off) {
    std::vector<PairFeatures> out;
    for (std::size_t i = 0; i < ss.size(); ++i) {
      auto p = b.pair(ss[i], Variant::AdaptiveSeq, off + static_cast<std::uint32_t>(i));
      p.chosen.temp_index = {good};
      p.rejected.temp_index = {bad};
      out.push_back(extract_features(b.fast, p));
    }
    return out;
  };
  auto feats = make(data::gen_arith(40, 1), 0, K - 1, 0);
  const auto div = make(data::gen_diverse(40, 1), K - 1, 0, 100);
  feats.insert(feats.end(), div.begin(), div.end());
  auto cfg = config_for(LossVariant::TempTokensOnly, 1.0);
  cfg.steps = 150;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  const auto res = train(feats, b.uniform, cfg);
  CHECK(std::isfinite(res.curve.back().total));
  for (const auto& c : res.curve) CHECK(std::isfinite(c.total));
  CHECK(res.curve.front().total == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(res.curve.back().total < std::log(2.0));

  lm::FastHead fh(res.head);
  int arith_ok = 0, div_ok = 0;
  const auto ta = data::gen_arith(30, 77), td = data::gen_diverse(30, 77);
  for (const auto& s : ta) {
    const auto h = b.fast.hidden_all(s.prompt);
    const auto p = fh.probs(std::span<const float>(h).subspan(h.size() - b.cfg.d_model));
    arith_ok += decoding::select_temp_greedy(p, fh.grid()).index == 0;
  }
  for (const auto& s : td) {
    const auto h = b.fast.hidden_all(s.prompt);
    const auto p = fh.probs(std::span<const float>(h).subspan(h.size() - b.cfg.d_model));
    div_ok += decoding::select_temp_greedy(p, fh.grid()).tau > 0.5;
  }
  CHECK(arith_ok >= 27);
  CHECK(div_ok >= 27);
}
