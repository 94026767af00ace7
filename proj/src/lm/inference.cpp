#include "adec/lm/inference.hpp"

#include <cmath>

#include "adec/errors.hpp"

namespace adec::lm {

namespace {

RowMatF mat(const ad::ParamSet& ps, const std::string& name) {
  const auto& p = ps.get(name);
  const std::size_t r = p.shape.size() == 2 ? p.shape[0] : 1;
  const std::size_t c = p.shape.size() == 2 ? p.shape[1] : p.shape[0];
  return Eigen::Map<const RowMatF>(p.data.data(), r, c);
}

RowVecF vec(const ad::ParamSet& ps, const std::string& name) {
  const auto& p = ps.get(name);
  return Eigen::Map<const RowVecF>(p.data.data(), p.data.size());
}

std::string lname(int l, const char* suffix) { return "l" + std::to_string(l) + "." + suffix; }

RowVecF layer_norm(const RowVecF& x, const RowVecF& g, const RowVecF& b) {
  const Eigen::Index n = x.size();
  double mu = 0;
  for (Eigen::Index i = 0; i < n; ++i) mu += x[i];
  mu /= n;
  double var = 0;
  for (Eigen::Index i = 0; i < n; ++i) var += (x[i] - mu) * (x[i] - mu);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + 1e-5);
  RowVecF out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = static_cast<float>((x[i] - mu) * inv * g[i] + b[i]);
  return out;
}

float gelu(float xf) {
  const double x = xf;
  return static_cast<float>(0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x))));
}

float silu(float xf) {
  const double x = xf;
  const double s = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return static_cast<float>(x * s);
}

}  // namespace

FastBase::FastBase(const BaseModel& model) : cfg_(model.config) {
  const auto& ps = model.params;
  tok_emb_ = mat(ps, "tok_emb");
  pos_emb_ = mat(ps, "pos_emb");
  unembed_ = mat(ps, "unembed");
  lnf_g_ = vec(ps, "ln_f.g");
  lnf_b_ = vec(ps, "ln_f.b");
  for (int l = 0; l < cfg_.n_layers; ++l) {
    Layer L;
    L.ln1_g = vec(ps, lname(l, "ln1.g"));
    L.ln1_b = vec(ps, lname(l, "ln1.b"));
    L.wqkv = mat(ps, lname(l, "attn.wqkv"));
    L.bqkv = vec(ps, lname(l, "attn.bqkv"));
    L.wo = mat(ps, lname(l, "attn.wo"));
    L.bo = vec(ps, lname(l, "attn.bo"));
    L.ln2_g = vec(ps, lname(l, "ln2.g"));
    L.ln2_b = vec(ps, lname(l, "ln2.b"));
    L.w1 = mat(ps, lname(l, "mlp.w1"));
    L.b1 = vec(ps, lname(l, "mlp.b1"));
    L.w2 = mat(ps, lname(l, "mlp.w2"));
    L.b2 = vec(ps, lname(l, "mlp.b2"));
    layers_.push_back(std::move(L));
  }
}

FastBase::Cache FastBase::new_cache() const {
  Cache c;
  for (int l = 0; l < cfg_.n_layers; ++l) {
    c.k.emplace_back(cfg_.ctx_len, cfg_.d_model);
    c.v.emplace_back(cfg_.ctx_len, cfg_.d_model);
  }
  return c;
}

void FastBase::step(Cache& cache, int token, std::span<float> h) const {
  if (token < 0 || token >= cfg_.vocab_size) {
    throw IndexError("token id " + std::to_string(token) + " outside vocabulary");
  }
  if (cache.len >= cfg_.ctx_len) throw LengthError("context window exhausted");
  if (static_cast<int>(h.size()) != cfg_.d_model) throw DimensionError("hidden buffer has wrong width");
  const int t = cache.len;
  const int d = cfg_.d_model, dh = cfg_.head_dim();
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  RowVecF x = tok_emb_.row(token) + pos_emb_.row(t);
  Eigen::VectorXf scores(t + 1);
  RowVecF att(d);
  for (int l = 0; l < cfg_.n_layers; ++l) {
    const Layer& L = layers_[l];
    RowVecF qkv = layer_norm(x, L.ln1_g, L.ln1_b) * L.wqkv + L.bqkv;
    cache.k[l].row(t) = qkv.segment(d, d);
    cache.v[l].row(t) = qkv.segment(2 * d, d);
    for (int hd = 0; hd < cfg_.n_heads; ++hd) {
      const int o = hd * dh;
      scores.noalias() = cache.k[l].block(0, o, t + 1, dh) * qkv.segment(o, dh).transpose();
      scores *= scale;
      const float mx = scores.maxCoeff();
      double z = 0;
      for (int j = 0; j <= t; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        z += scores[j];
      }
      scores /= static_cast<float>(z);
      att.segment(o, dh).noalias() = scores.transpose() * cache.v[l].block(0, o, t + 1, dh);
    }
    x += att * L.wo + L.bo;
    RowVecF up = layer_norm(x, L.ln2_g, L.ln2_b) * L.w1 + L.b1;
    up = up.unaryExpr(&gelu);
    x += up * L.w2 + L.b2;
  }
  RowVecF out = layer_norm(x, lnf_g_, lnf_b_);
  std::copy(out.data(), out.data() + d, h.begin());
  cache.len = t + 1;
}

void FastBase::logits(std::span<const float> h, std::span<float> out) const {
  if (static_cast<int>(h.size()) != cfg_.d_model || static_cast<int>(out.size()) != cfg_.vocab_size) {
    throw DimensionError("logits buffers have wrong width");
  }
  Eigen::Map<RowVecF>(out.data(), out.size()).noalias() =
      Eigen::Map<const RowVecF>(h.data(), h.size()) * unembed_;
}

std::vector<float> FastBase::hidden_all(std::span<const int> tokens) const {
  check_tokens(cfg_, tokens);
  auto cache = new_cache();
  std::vector<float> out(tokens.size() * cfg_.d_model);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    step(cache, tokens[t], std::span<float>(out.data() + t * cfg_.d_model, cfg_.d_model));
  }
  return out;
}

FastHead::FastHead(const AdaptiveHead& head) : grid_(head.grid) {
  w1_ = mat(head.params, "head.w1");
  w2_ = mat(head.params, "head.w2");
  w3_ = mat(head.params, "head.w3");
  b1_ = vec(head.params, "head.b1");
  b2_ = vec(head.params, "head.b2");
  b3_ = vec(head.params, "head.b3");
}

std::vector<double> FastHead::probs(std::span<const float> h) const {
  if (static_cast<Eigen::Index>(h.size()) != w1_.rows()) {
    throw DimensionError("temperature head expects width " + std::to_string(w1_.rows()));
  }
  RowVecF a = (Eigen::Map<const RowVecF>(h.data(), h.size()) * w1_ + b1_).unaryExpr(&silu);
  RowVecF b = (a * w2_ + b2_).unaryExpr(&silu);
  RowVecF z = b * w3_ + b3_;
  double mx = z.maxCoeff();
  std::vector<double> p(z.size());
  double s = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) s += (p[i] = std::exp(double(z[i]) - mx));
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace adec::lm
