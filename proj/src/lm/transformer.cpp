#include "adec/lm/transformer.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "adec/errors.hpp"

namespace adec::lm {

namespace {

std::string lname(int l, const char* suffix) { return "l" + std::to_string(l) + "." + suffix; }

std::vector<float> normal_vec(std::size_t n, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, stddev);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(nd(rng));
  return v;
}

}  // namespace

BaseModel BaseModel::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BaseModel m;
  m.config = cfg;
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.d_model, v = cfg.vocab_size, c = cfg.ctx_len;
  const double s = 0.02;
  const double s_res = 0.02 / std::sqrt(2.0 * cfg.n_layers);
  auto& p = m.params;
  p.add("tok_emb", {v, d}, normal_vec(v * d, s, rng));
  p.add("pos_emb", {c, d}, normal_vec(c * d, s, rng));
  for (int l = 0; l < cfg.n_layers; ++l) {
    p.add(lname(l, "ln1.g"), {d}, std::vector<float>(d, 1.0f));
    p.add(lname(l, "ln1.b"), {d}, std::vector<float>(d, 0.0f));
    p.add(lname(l, "attn.wqkv"), {d, 3 * d}, normal_vec(d * 3 * d, s, rng));
    p.add(lname(l, "attn.bqkv"), {3 * d}, std::vector<float>(3 * d, 0.0f));
    p.add(lname(l, "attn.wo"), {d, d}, normal_vec(d * d, s_res, rng));
    p.add(lname(l, "attn.bo"), {d}, std::vector<float>(d, 0.0f));
    p.add(lname(l, "ln2.g"), {d}, std::vector<float>(d, 1.0f));
    p.add(lname(l, "ln2.b"), {d}, std::vector<float>(d, 0.0f));
    p.add(lname(l, "mlp.w1"), {d, 4 * d}, normal_vec(d * 4 * d, s, rng));
    p.add(lname(l, "mlp.b1"), {4 * d}, std::vector<float>(4 * d, 0.0f));
    p.add(lname(l, "mlp.w2"), {4 * d, d}, normal_vec(4 * d * d, s_res, rng));
    p.add(lname(l, "mlp.b2"), {d}, std::vector<float>(d, 0.0f));
  }
  p.add("ln_f.g", {d}, std::vector<float>(d, 1.0f));
  p.add("ln_f.b", {d}, std::vector<float>(d, 0.0f));
  p.add("unembed", {d, v}, normal_vec(d * v, s, rng));
  return m;
}

void check_tokens(const ModelConfig& cfg, std::span<const int> tokens) {
  if (tokens.empty()) throw LengthError("empty token sequence");
  if (static_cast<int>(tokens.size()) > cfg.ctx_len) {
    throw LengthError("sequence of " + std::to_string(tokens.size()) + " tokens exceeds ctx_len " +
                      std::to_string(cfg.ctx_len));
  }
  for (int t : tokens) {
    if (t < 0 || t >= cfg.vocab_size) {
      throw IndexError("token id " + std::to_string(t) + " outside vocabulary of " +
                       std::to_string(cfg.vocab_size));
    }
  }
}

template <class T>
ad::Tensor<T> forward_hidden(ad::Tape<T>& tape, const ad::Bound<T>& p, const ModelConfig& cfg,
                             std::span<const int> tokens) {
  check_tokens(cfg, tokens);
  const std::size_t n = tokens.size();
  const std::size_t d = cfg.d_model, dh = cfg.head_dim();
  std::vector<int> pos(n);
  std::iota(pos.begin(), pos.end(), 0);
  auto x = tape.add(tape.embedding(p["tok_emb"], tokens), tape.embedding(p["pos_emb"], pos));
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int l = 0; l < cfg.n_layers; ++l) {
    auto h = tape.layer_norm(x, p[lname(l, "ln1.g")], p[lname(l, "ln1.b")]);
    auto qkv = tape.add_bias(tape.matmul(h, p[lname(l, "attn.wqkv")]), p[lname(l, "attn.bqkv")]);
    std::vector<ad::Tensor<T>> heads;
    heads.reserve(cfg.n_heads);
    for (int hd = 0; hd < cfg.n_heads; ++hd) {
      const std::size_t o = hd * dh;
      auto q = tape.slice_cols(qkv, o, o + dh);
      auto k = tape.slice_cols(qkv, d + o, d + o + dh);
      auto v = tape.slice_cols(qkv, 2 * d + o, 2 * d + o + dh);
      auto a = tape.causal_softmax(tape.matmul(q, tape.transpose(k)), scale);
      heads.push_back(tape.matmul(a, v));
    }
    auto att = tape.add_bias(tape.matmul(tape.concat_cols(heads), p[lname(l, "attn.wo")]),
                             p[lname(l, "attn.bo")]);
    x = tape.add(x, att);
    auto h2 = tape.layer_norm(x, p[lname(l, "ln2.g")], p[lname(l, "ln2.b")]);
    auto up = tape.gelu(tape.add_bias(tape.matmul(h2, p[lname(l, "mlp.w1")]), p[lname(l, "mlp.b1")]));
    auto down = tape.add_bias(tape.matmul(up, p[lname(l, "mlp.w2")]), p[lname(l, "mlp.b2")]);
    x = tape.add(x, down);
  }
  return tape.layer_norm(x, p["ln_f.g"], p["ln_f.b"]);
}

template <class T>
ad::Tensor<T> token_logits(ad::Tape<T>& tape, const ad::Bound<T>& p, const ad::Tensor<T>& h) {
  const auto& w = p["unembed"];
  if (h.cols() != w.dim(0)) {
    throw DimensionError("token_logits: hidden width " + std::to_string(h.cols()) +
                         " does not match d_model " + std::to_string(w.dim(0)));
  }
  return tape.matmul(h, w);
}

ad::Tensor<double> forward_hidden(const BaseModel& model, std::span<const int> tokens) {
  auto p = model.params.bind<double>(false);
  ad::Tape<double> tape;
  return forward_hidden(tape, p, model.config, tokens);
}

ad::Tensor<double> token_logits(const BaseModel& model, const ad::Tensor<double>& h) {
  auto p = model.params.bind<double>(false);
  ad::Tape<double> tape;
  return token_logits(tape, p, h);
}

template <class T>
ad::Tensor<T> sequence_nll(ad::Tape<T>& tape, const ad::Bound<T>& p, const ModelConfig& cfg,
                           std::span<const int> tokens) {
  if (tokens.size() < 2) throw LengthError("sequence_nll needs at least two tokens");
  auto h = forward_hidden(tape, p, cfg, tokens.first(tokens.size() - 1));
  auto logits = token_logits(tape, p, h);
  return tape.cross_entropy(logits, tokens.subspan(1));
}

template ad::Tensor<float> forward_hidden(ad::Tape<float>&, const ad::Bound<float>&, const ModelConfig&,
                                          std::span<const int>);
template ad::Tensor<double> forward_hidden(ad::Tape<double>&, const ad::Bound<double>&, const ModelConfig&,
                                           std::span<const int>);
template ad::Tensor<float> token_logits(ad::Tape<float>&, const ad::Bound<float>&, const ad::Tensor<float>&);
template ad::Tensor<double> token_logits(ad::Tape<double>&, const ad::Bound<double>&, const ad::Tensor<double>&);
template ad::Tensor<float> sequence_nll(ad::Tape<float>&, const ad::Bound<float>&, const ModelConfig&,
                                        std::span<const int>);
template ad::Tensor<double> sequence_nll(ad::Tape<double>&, const ad::Bound<double>&, const ModelConfig&,
                                         std::span<const int>);

}  // namespace adec::lm
