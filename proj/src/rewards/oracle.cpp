#include "adec/rewards/oracle.hpp"

#include "adec/data/tokenizer.hpp"
#include "adec/errors.hpp"

namespace adec::rewards {

std::string to_string(OracleKind k) {
  switch (k) {
    case OracleKind::Auto: return "auto";
    case OracleKind::Repeat: return "repeat";
    case OracleKind::Arith: return "arith";
    case OracleKind::Diversity: return "diversity";
    case OracleKind::Constrained: return "constrained";
    case OracleKind::General: return "general";
    case OracleKind::Remote: return "remote";
  }
  return "?";
}

OracleKind oracle_kind_from_string(const std::string& s) {
  for (auto k : {OracleKind::Auto, OracleKind::Repeat, OracleKind::Arith, OracleKind::Diversity,
                 OracleKind::Constrained, OracleKind::General, OracleKind::Remote}) {
    if (to_string(k) == s) return k;
  }
  throw UsageError("unknown oracle '" + s + "'");
}

Oracle::Oracle(OracleKind kind, std::shared_ptr<RemoteScorer> remote) : kind_(kind), remote_(std::move(remote)) {
  if (kind_ == OracleKind::Remote && !remote_) throw UsageError("remote oracle needs an endpoint");
}

Score Oracle::score(const decoding::GenerationRecord& r) const {
  const auto body = r.response_body();
  OracleKind k = kind_;
  if (k == OracleKind::Auto) {
    switch (r.task) {
      case data::TaskTag::Completion: k = OracleKind::Repeat; break;
      case data::TaskTag::Arith: k = OracleKind::Arith; break;
      case data::TaskTag::Diverse: k = OracleKind::Diversity; break;
      case data::TaskTag::Constrained: k = OracleKind::Constrained; break;
      case data::TaskTag::Mixed: k = OracleKind::General; break;
    }
  }
  const std::string prompt = data::tokenizer().decode(r.prompt);
  switch (k) {
    case OracleKind::Repeat: {
      const double rate = ngram_repeat_rate(body, 3);
      return Score{-rate, {{"repeat3", rate}}};
    }
    case OracleKind::Arith: {
      if (!r.gold) throw DataError("arith oracle needs a gold answer");
      const double v = exact_answer_reward(data::tokenizer().decode(body), *r.gold);
      return Score{v, {{"correct", v}}};
    }
    case OracleKind::Diversity: return diversity_reward(body);
    case OracleKind::Constrained: {
      if (!r.constraint) throw DataError("constrained oracle needs a constraint token");
      Score s = diversity_reward(body);
      s.components["constraint_rate"] = constraint_rate(body, *r.constraint, data::Tokenizer::kSep);
      return s;
    }
    case OracleKind::General: {
      if (const auto p = data::parse_arith_prompt(prompt)) {
        const double v = exact_answer_reward(data::tokenizer().decode(body), std::to_string(p->value()));
        return Score{v, {{"correct", v}}};
      }
      return diversity_reward(body);
    }
    case OracleKind::Remote: return remote_->score(prompt, data::tokenizer().decode(body));
    case OracleKind::Auto: break;
  }
  throw ContractError("unreachable oracle kind");
}

}  // namespace adec::rewards
