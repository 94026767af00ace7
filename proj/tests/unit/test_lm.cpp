#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "adec/autodiff/grad_check.hpp"
#include "adec/data/tasks.hpp"
#include "adec/errors.hpp"
#include "adec/lm/checkpoint.hpp"
#include "adec/lm/inference.hpp"
#include "adec/lm/pretrain.hpp"
#include "fixtures.hpp"

using namespace adec;
using namespace adec::lm;

namespace {

std::vector<int> sample_tokens() { return data::tokenizer().encode("Q: 12+34 = ? A: 6"); }

std::vector<int> with_bos(std::vector<int> t) {
  t.insert(t.begin(), data::Tokenizer::kBos);
  return t;
}

double max_abs_diff(std::span<const double> a, std::span<const float> b) {
  REQUIRE(a.size() == b.size());
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("model config validation rejects bad shapes") {
  auto c = fixtures::tiny_config();
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.n_heads = 3;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  bad = c;
  bad.temperature_grid = {0.5};
  CHECK_THROWS_AS(bad.validate(), UsageError);
  CHECK_THROWS_AS(validate_grid({0.0, 0.4, 0.2}), UsageError);
  CHECK_THROWS_AS(validate_grid({0.0, 2.5}), UsageError);
  CHECK_NOTHROW(validate_grid({0.0, 0.1, 0.2, 0.4, 0.6}));
}

TEST_CASE("model config json round trip and unknown keys") {
  auto c = fixtures::tiny_config();
  auto back = model_config_from_json(to_json(c));
  CHECK(back.hash() == c.hash());
  auto j = to_json(c);
  j["dropout"] = 0.1;
  CHECK_THROWS_AS(model_config_from_json(j), UsageError);
}

TEST_CASE("base hash ignores the temperature grid and head width") {
  auto a = fixtures::tiny_config();
  auto b = a;
  b.temperature_grid = {0.0, 1.0};
  b.head_hidden = 32;
  CHECK(a.base_hash() == b.base_hash());
  CHECK(a.hash() != b.hash());
  b.d_model = 32;
  CHECK(a.base_hash() != b.base_hash());
}

TEST_CASE("token checks") {
  auto c = fixtures::tiny_config();
  CHECK_THROWS_AS(check_tokens(c, std::vector<int>{}), LengthError);
  CHECK_THROWS_AS(check_tokens(c, std::vector<int>(c.ctx_len + 1, 3)), LengthError);
  CHECK_THROWS_AS(check_tokens(c, std::vector<int>{0, c.vocab_size}), IndexError);
  CHECK_THROWS_AS(check_tokens(c, std::vector<int>{0, -1}), IndexError);
}

TEST_CASE("fast inference matches the tape forward") {
  const auto cfg = fixtures::tiny_config();
  const auto model = BaseModel::init(cfg, 11);
  const auto toks = with_bos(sample_tokens());
  const auto h = forward_hidden(model, toks);
  FastBase fast(model);
  const auto fh = fast.hidden_all(toks);
  CHECK(max_abs_diff(h.data(), fh) < 1e-5);

  // Incremental steps give the same final states.
  auto cache = fast.new_cache();
  std::vector<float> row(cfg.d_model), logits(cfg.vocab_size);
  const auto lg = token_logits(model, h);
  for (std::size_t t = 0; t < toks.size(); ++t) {
    fast.step(cache, toks[t], row);
    CHECK(max_abs_diff(h.data().subspan(t * cfg.d_model, cfg.d_model), row) < 1e-5);
    fast.logits(row, logits);
    CHECK(max_abs_diff(lg.data().subspan(t * cfg.vocab_size, cfg.vocab_size), logits) < 1e-5);
  }
}

TEST_CASE("hidden states are causal") {
  const auto cfg = fixtures::tiny_config();
  const auto model = BaseModel::init(cfg, 3);
  auto toks = with_bos(sample_tokens());
  const auto full = forward_hidden(model, toks);
  for (std::size_t cut : {1ul, 4ul, toks.size() - 1}) {
    std::vector<int> prefix(toks.begin(), toks.begin() + cut);
    const auto part = forward_hidden(model, prefix);
    for (std::size_t i = 0; i < part.size(); ++i) CHECK(part[i] == doctest::Approx(full[i]).epsilon(1e-12));
  }
  // Changing a later token leaves earlier rows unchanged.
  auto other = toks;
  other.back() = 5;
  const auto alt = forward_hidden(model, other);
  const std::size_t keep = (toks.size() - 1) * cfg.d_model;
  for (std::size_t i = 0; i < keep; ++i) CHECK(alt[i] == doctest::Approx(full[i]).epsilon(1e-12));
}

TEST_CASE("head starts uniform and fast head matches the tape") {
  const auto cfg = fixtures::tiny_config();
  const auto head = AdaptiveHead::init(cfg, 5);
  std::vector<float> h(cfg.d_model);
  for (int i = 0; i < cfg.d_model; ++i) h[i] = std::sin(0.3f * i);
  for (double p : temp_distribution(head, h)) CHECK(p == 1.0 / cfg.grid_size());

  const auto ph = fixtures::perturbed_head(cfg, 9);
  const auto slow = temp_distribution(ph, h);
  const auto fast = FastHead(ph).probs(h);
  double sum = 0;
  for (std::size_t k = 0; k < slow.size(); ++k) {
    CHECK(fast[k] == doctest::Approx(slow[k]).epsilon(1e-5));
    sum += slow[k];
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit exact") {
  const auto cfg = fixtures::tiny_config();
  const auto model = BaseModel::init(cfg, 21);
  const auto head = fixtures::perturbed_head(cfg, 4);
  const auto dir = std::filesystem::temp_directory_path() / "adec_ck_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "m.adck").string();
  save_checkpoint(path, make_checkpoint(&model, &head, {7, 21, cfg.hash(), "base+head"}));
  const auto ck = load_checkpoint(path);
  CHECK(ck.meta.step == 7);
  CHECK(ck.meta.config_hash == cfg.hash());
  CHECK(has_base(ck));
  CHECK(has_head(ck));
  const auto b = base_from(ck);
  CHECK(b.params.bit_equal(model.params));
  CHECK(b.frozen);
  CHECK(head_from(ck).params.bit_equal(head.params));

  std::ofstream(dir / "bad.adck") << "XXXX garbage";
  CHECK_THROWS_AS(load_checkpoint((dir / "bad.adck").string()), FormatError);
  // Truncation is detected.
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 10);
  CHECK_THROWS_AS(load_checkpoint(path), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sequence NLL gradient passes grad_check") {
  auto cfg = fixtures::tiny_config();
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.ctx_len = 8;
  const auto model = BaseModel::init(cfg, 2);
  const std::vector<int> toks{0, 5, 9, 5, 12, 1};
  std::vector<std::string> names;
  for (const auto& [name, _] : model.params.all()) names.push_back(name);

  auto run = [&]<class T>(double eps, double tol) {
    const auto bound = model.params.bind<T>(true);
    std::vector<ad::Tensor<T>> inputs;
    for (const auto& n : names) inputs.push_back(bound[n]);
    ad::ScalarFn<T> f = [&](ad::Tape<T>& tape, const std::vector<ad::Tensor<T>>& in) {
      ad::Bound<T> b;
      for (std::size_t i = 0; i < names.size(); ++i) b.put(names[i], in[i]);
      return sequence_nll(tape, b, cfg, toks);
    };
    const auto r = ad::grad_check<T>(f, inputs, eps);
    CHECK(r.elements_checked == model.params.total_size());
    CHECK(r.max_rel_error < tol);
  };
  run.operator()<double>(1e-5, 1e-5);
  run.operator()<float>(1e-3, 1e-3);
}

TEST_CASE("pretraining lowers held-out NLL and freezes the model") {
  auto cfg = fixtures::tiny_config();
  data::CorpusConfig cc;
  cc.arith_docs = 60;
  cc.diverse_docs = 30;
  cc.constrained_docs = 30;
  cc.plain_docs = 30;
  const auto corpus = data::encode_corpus(data::build_corpus(cc));
  auto model = BaseModel::init(cfg, 1);
  PretrainConfig pc;
  pc.steps = 30;
  pc.batch_docs = 4;
  pc.warmup = 5;
  pc.heldout_frac = 0.1;
  const auto stats = pretrain_base(model, corpus, pc);
  CHECK(stats.final_heldout_nll < stats.initial_heldout_nll);
  CHECK(model.frozen);
  CHECK_THROWS_AS(pretrain_base(model, corpus, pc), ContractError);
  auto fresh = BaseModel::init(cfg, 1);
  CHECK_THROWS_AS(pretrain_base(fresh, {}, pc), DataError);
}
