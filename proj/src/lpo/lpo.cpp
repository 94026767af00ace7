#include "adec/lpo/lpo.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "adec/decoding/sampling.hpp"
#include "adec/errors.hpp"
#include "adec/util/parallel.hpp"

namespace adec::lpo {

std::string to_string(LossVariant v) {
  switch (v) {
    case LossVariant::JointTokens: return "joint_tokens";
    case LossVariant::TempTokensOnly: return "temp_tokens_only";
    case LossVariant::TempAsLatents: return "temp_as_latents";
    case LossVariant::NLLChosen: return "nll_chosen";
  }
  return "?";
}

LossVariant loss_variant_from_string(const std::string& s) {
  for (auto v : {LossVariant::JointTokens, LossVariant::TempTokensOnly, LossVariant::TempAsLatents,
                 LossVariant::NLLChosen}) {
    if (to_string(v) == s) return v;
  }
  throw UsageError("unknown loss variant '" + s + "'");
}

void LossConfig::validate() const {
  if (!(beta > 0) || !std::isfinite(beta)) throw UsageError("beta must be positive");
  if (!(learning_rate > 0)) throw UsageError("learning_rate must be positive");
  if (steps < 0) throw UsageError("steps must be non-negative");
  if (batch_size < 1) throw UsageError("batch_size must be at least 1");
}

nlohmann::json to_json(const LossConfig& c) {
  return {{"variant", to_string(c.variant)}, {"beta", c.beta},          {"learning_rate", c.learning_rate},
          {"steps", c.steps},                {"batch_size", c.batch_size}, {"seed", c.seed},
          {"uniform_temp_reference", c.uniform_temp_reference}};
}

LossConfig loss_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("loss config must be an object");
  LossConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "variant") c.variant = loss_variant_from_string(v.get<std::string>());
      else if (key == "beta") c.beta = v.get<double>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "steps") c.steps = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "uniform_temp_reference") c.uniform_temp_reference = v.get<bool>();
      else throw UsageError("unknown loss config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad loss config: ") + e.what());
  }
  c.validate();
  return c;
}

RecordFeatures extract_features(const lm::FastBase& base, const decoding::GenerationRecord& rec,
                                const lm::FastBase* ref) {
  rec.validate();
  if (rec.grid.empty()) throw ContractError("record was not generated by an adaptive policy");
  const auto& cfg = base.config();
  RecordFeatures f;
  f.d_model = cfg.d_model;
  f.k = static_cast<int>(rec.grid.size());
  f.per_token = rec.variant == decoding::Variant::AdaptiveTok;
  f.temp_index = rec.temp_index;

  const std::size_t p = rec.prompt.size(), L = rec.response.size(), d = cfg.d_model;
  std::vector<int> seq(rec.prompt);
  if (L > 0) seq.insert(seq.end(), rec.response.begin(), rec.response.end() - 1);
  const auto hid = base.hidden_all(seq);
  std::vector<float> ref_hid;
  if (ref) ref_hid = ref->hidden_all(seq);

  auto row = [&](const std::vector<float>& hs, std::size_t pos) {
    return std::span<const float>(hs.data() + pos * d, d);
  };
  auto append = [&](std::vector<double>& dst, std::size_t pos) {
    auto r = row(hid, pos);
    dst.insert(dst.end(), r.begin(), r.end());
  };

  if (f.per_token) {
    if (f.temp_index.size() != L) throw ContractError("token-level record needs one temperature per token");
    for (std::size_t t = 0; t < L; ++t) append(f.hidden, p - 1 + t);
    f.latent_hidden = f.hidden;
  } else {
    if (f.temp_index.size() != 1) throw ContractError("sequence-level record needs one temperature");
    append(f.hidden, p - 1);
    for (std::size_t t = 0; t < L; ++t) append(f.latent_hidden, p - 1);
  }

  std::vector<float> logits(cfg.vocab_size);
  f.token_q.reserve(L * f.k);
  for (std::size_t t = 0; t < L; ++t) {
    const int y = rec.response[t];
    base.logits(row(hid, p - 1 + t), logits);
    const int top = decoding::argmax(std::span<const float>(logits));
    for (double tau : rec.grid) {
      f.token_q.push_back(tau == 0 ? (y == top ? 1.0 : 0.0) : decoding::tempered_probs(logits, tau)[y]);
    }
    f.word_logprob.push_back(decoding::token_logprob(logits, rec.tau_at(t), y));
    if (ref) {
      ref->logits(row(ref_hid, p - 1 + t), logits);
      f.ref_word_logprob.push_back(decoding::token_logprob(logits, rec.tau_at(t), y));
    }
  }
  if (!ref) f.ref_word_logprob = f.word_logprob;
  return f;
}

PairFeatures extract_features(const lm::FastBase& base, const pairs::PreferencePair& pair, const lm::FastBase* ref) {
  auto c = extract_features(base, pair.chosen, ref);
  auto r = extract_features(base, pair.rejected, ref);
  if (c.k != r.k) throw ContractError("pair records use different temperature grids");
  return {std::move(c), std::move(r)};
}

namespace {

template <class T>
ad::Tensor<T> constant(double v) {
  return ad::Tensor<T>::scalar(static_cast<T>(v));
}

template <class T>
ad::Tensor<T> matrix(const std::vector<double>& values, std::size_t cols) {
  return ad::Tensor<T>({values.size() / cols, cols}, std::vector<T>(values.begin(), values.end()));
}

template <class T>
ad::Tensor<T> temp_term(ad::Tape<T>& tape, const ad::Bound<T>& head, const RecordFeatures& f, bool reference) {
  auto lp = temp_seq_logprob(tape, head, f);
  if (!reference) return lp;
  // A uniform head gives each decision ln(1/K).
  return tape.add(lp, constant<T>(static_cast<double>(f.decisions()) * std::log(static_cast<double>(f.k))));
}

template <class T>
ad::Tensor<T> latent_term(ad::Tape<T>& tape, const ad::Bound<T>& head, const RecordFeatures& f) {
  const std::size_t L = f.length(), K = f.k;
  if (L == 0) return constant<T>(0.0);
  double ref = 0;
  for (std::size_t t = 0; t < L; ++t) {
    double m = 0;
    for (std::size_t k = 0; k < K; ++k) m += f.token_q[t * K + k];
    ref += std::log(std::max(m / K, ad::kProbFloor));
  }
  auto probs = lm::temp_distribution(tape, head, matrix<T>(f.latent_hidden, f.d_model));
  auto mix = tape.row_sum(tape.mul(probs, matrix<T>(f.token_q, K)));
  return tape.sub(tape.sum(tape.log_floor(mix)), constant<T>(ref));
}

double word_ratio(const RecordFeatures& f) {
  double s = 0;
  for (std::size_t t = 0; t < f.length(); ++t) s += f.word_logprob[t] - f.ref_word_logprob[t];
  return s;
}

template <class T>
ad::Tensor<T> preference(ad::Tape<T>& tape, const ad::Tensor<T>& c, const ad::Tensor<T>& r, double beta,
                         LossBreakdown* out) {
  auto margin = tape.sub(c, r);
  auto total = tape.neg_log_sigmoid(tape.scale(margin, static_cast<T>(beta)));
  if (out) *out = {total.item(), margin.item(), c.item(), r.item()};
  return total;
}

}  // namespace

template <class T>
ad::Tensor<T> temp_seq_logprob(ad::Tape<T>& tape, const ad::Bound<T>& head, const RecordFeatures& f) {
  if (f.decisions() == 0) throw ContractError("record has no temperature decisions");
  auto probs = lm::temp_distribution(tape, head, matrix<T>(f.hidden, f.d_model));
  return tape.sum(tape.log_prob_gather(probs, f.temp_index));
}

template <class T>
ad::Tensor<T> pair_loss(ad::Tape<T>& tape, const ad::Bound<T>& head, const PairFeatures& pf, const LossConfig& cfg,
                        LossBreakdown* out) {
  const bool ref = cfg.uniform_temp_reference;
  switch (cfg.variant) {
    case LossVariant::TempTokensOnly:
      return preference(tape, temp_term(tape, head, pf.chosen, ref), temp_term(tape, head, pf.rejected, ref),
                        cfg.beta, out);
    case LossVariant::JointTokens: {
      auto c = tape.add(temp_term(tape, head, pf.chosen, ref), constant<T>(word_ratio(pf.chosen)));
      auto r = tape.add(temp_term(tape, head, pf.rejected, ref), constant<T>(word_ratio(pf.rejected)));
      return preference(tape, c, r, cfg.beta, out);
    }
    case LossVariant::TempAsLatents:
      return preference(tape, latent_term(tape, head, pf.chosen), latent_term(tape, head, pf.rejected), cfg.beta,
                        out);
    case LossVariant::NLLChosen: {
      auto lp = temp_seq_logprob(tape, head, pf.chosen);
      auto total = tape.scale(lp, T(-1));
      if (out) *out = {total.item(), 0.0, lp.item(), 0.0};
      return total;
    }
  }
  throw ContractError("unknown loss variant");
}

double temp_seq_logprob(const lm::AdaptiveHead& head, const lm::FastBase& base,
                        const decoding::GenerationRecord& rec) {
  const auto f = extract_features(base, rec);
  ad::Tape<double> tape;
  return temp_seq_logprob(tape, head.params.bind<double>(false), f).item();
}

LossBreakdown evaluate(const PairFeatures& pf, const lm::AdaptiveHead& head, const LossConfig& cfg) {
  ad::Tape<double> tape;
  LossBreakdown b;
  pair_loss(tape, head.params.bind<double>(false), pf, cfg, &b);
  return b;
}

LossBreakdown loss_temp_only(const pairs::PreferencePair& pair, const lm::AdaptiveHead& head,
                             const lm::FastBase& base, double beta, bool uniform_temp_reference) {
  LossConfig cfg;
  cfg.variant = LossVariant::TempTokensOnly;
  cfg.beta = beta;
  cfg.uniform_temp_reference = uniform_temp_reference;
  cfg.validate();
  return evaluate(extract_features(base, pair), head, cfg);
}

LossBreakdown loss_joint(const pairs::PreferencePair& pair, const lm::AdaptiveHead& head, const lm::FastBase& base,
                         const lm::FastBase& ref_base, double beta, bool uniform_temp_reference) {
  LossConfig cfg;
  cfg.variant = LossVariant::JointTokens;
  cfg.beta = beta;
  cfg.uniform_temp_reference = uniform_temp_reference;
  cfg.validate();
  return evaluate(extract_features(base, pair, &ref_base), head, cfg);
}

LossBreakdown loss_latent(const pairs::PreferencePair& pair, const lm::AdaptiveHead& head,
                          const lm::FastBase& base, double beta) {
  LossConfig cfg;
  cfg.variant = LossVariant::TempAsLatents;
  cfg.beta = beta;
  cfg.validate();
  return evaluate(extract_features(base, pair), head, cfg);
}

double loss_nll_chosen(const std::vector<decoding::GenerationRecord>& chosen, const lm::AdaptiveHead& head,
                       const lm::FastBase& base) {
  if (chosen.empty()) throw ContractError("NLL over an empty record set");
  double s = 0;
  for (const auto& r : chosen) s -= temp_seq_logprob(head, base, r);
  return s / static_cast<double>(chosen.size());
}

LossBreakdown batch_gradient(const std::vector<PairFeatures>& features, std::span<const std::size_t> batch,
                             const lm::AdaptiveHead& head, const LossConfig& cfg, ad::GradAccum& grads,
                             int workers) {
  if (batch.empty()) throw ContractError("empty batch");
  std::vector<ad::GradAccum> per(batch.size(), ad::GradAccum(head.params));
  std::vector<LossBreakdown> parts(batch.size());
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    auto bound = head.params.bind<double>(true);
    ad::Tape<double> tape;
    auto loss = pair_loss(tape, bound, features.at(batch[i]), cfg, &parts[i]);
    if (!std::isfinite(parts[i].total)) {
      std::ostringstream os;
      os << "non-finite " << to_string(cfg.variant) << " loss on pair " << batch[i] << " (margin "
         << parts[i].margin << ", chosen " << parts[i].chosen_term << ", rejected " << parts[i].rejected_term << ")";
      throw NumericError(os.str());
    }
    tape.backward(loss);
    per[i].add(bound);
  });
  LossBreakdown mean;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    grads.add(per[i]);
    mean.total += parts[i].total * inv;
    mean.margin += parts[i].margin * inv;
    mean.chosen_term += parts[i].chosen_term * inv;
    mean.rejected_term += parts[i].rejected_term * inv;
  }
  grads.scale(inv);
  return mean;
}

TrainResult train(const std::vector<PairFeatures>& features, const lm::AdaptiveHead& head, const LossConfig& cfg,
                  int workers, const StepCallback& on_step) {
  cfg.validate();
  TrainResult res{head, {}};
  if (cfg.steps == 0) return res;
  if (features.empty()) throw DataError("no preference pairs to train on");
  ad::AdamConfig acfg;
  acfg.lr = cfg.learning_rate;
  ad::Adam adam(acfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(features.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t cursor = order.size();
  const std::size_t bs = std::min<std::size_t>(cfg.batch_size, features.size());
  std::vector<std::size_t> batch(bs);
  for (int step = 0; step < cfg.steps; ++step) {
    for (auto& b : batch) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      b = order[cursor++];
    }
    ad::GradAccum grads(res.head.params);
    const auto br = batch_gradient(features, batch, res.head, cfg, grads, workers);
    res.curve.push_back(br);
    if (on_step) on_step(step, br);
    adam.step(res.head.params, grads);
  }
  return res;
}

TrainResult train(const std::vector<pairs::PreferencePair>& pairs, const lm::AdaptiveHead& head,
                  const lm::FastBase& base, const LossConfig& cfg, int workers, const StepCallback& on_step) {
  std::vector<PairFeatures> feats(pairs.size());
  parallel_for(pairs.size(), workers, [&](std::size_t i) { feats[i] = extract_features(base, pairs[i]); });
  return train(feats, head, cfg, workers, on_step);
}

void write_loss_curve(const std::string& path, const std::vector<LossBreakdown>& curve) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path);
  os << "step,total,margin\n";
  os.precision(9);
  for (std::size_t i = 0; i < curve.size(); ++i) os << i << ',' << curve[i].total << ',' << curve[i].margin << '\n';
}

template ad::Tensor<float> temp_seq_logprob(ad::Tape<float>&, const ad::Bound<float>&, const RecordFeatures&);
template ad::Tensor<double> temp_seq_logprob(ad::Tape<double>&, const ad::Bound<double>&, const RecordFeatures&);
template ad::Tensor<float> pair_loss(ad::Tape<float>&, const ad::Bound<float>&, const PairFeatures&,
                                     const LossConfig&, LossBreakdown*);
template ad::Tensor<double> pair_loss(ad::Tape<double>&, const ad::Bound<double>&, const PairFeatures&,
                                      const LossConfig&, LossBreakdown*);

}  // namespace adec::lpo
