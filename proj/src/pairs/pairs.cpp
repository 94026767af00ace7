#include "adec/pairs/pairs.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "adec/errors.hpp"
#include "adec/util/parallel.hpp"

namespace adec::pairs {

std::optional<PairChoice> choose_by_score(std::span<const double> values) {
  if (values.size() < 2) throw ContractError("pair building needs at least two records");
  std::size_t hi = 0, lo = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[hi]) hi = i;
    if (values[i] < values[lo]) lo = i;
  }
  if (values[hi] == values[lo]) return std::nullopt;
  return PairChoice{hi, lo};
}

std::optional<PairChoice> choose_constrained(std::span<const double> rm, std::span<const double> rate) {
  if (rm.size() != rate.size()) throw ContractError("RM scores and constraint rates differ in length");
  if (rm.size() < 8) throw ContractError("constrained pair building needs at least 8 records");
  std::vector<std::size_t> order(rm.size());
  std::iota(order.begin(), order.end(), 0);
  // Best RM first; equal scores keep index order.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rm[a] > rm[b]; });
  const std::vector<std::size_t> top(order.begin(), order.begin() + 4);
  const std::vector<std::size_t> bottom(order.end() - 4, order.end());

  std::size_t c = top[0];
  for (std::size_t i : top) {
    if (rate[i] > rate[c] || (rate[i] == rate[c] && (rm[i] > rm[c] || (rm[i] == rm[c] && i < c)))) c = i;
  }
  std::size_t r = bottom[0];
  for (std::size_t i : bottom) {
    if (rate[i] < rate[r] || (rate[i] == rate[r] && (rm[i] < rm[r] || (rm[i] == rm[r] && i < r)))) r = i;
  }
  const bool strictly_better = rate[c] > rate[r] || (rate[c] == rate[r] && rm[c] > rm[r]);
  if (!strictly_better) return std::nullopt;
  return PairChoice{c, r};
}

std::optional<PreferencePair> build_pair_by_score(const std::vector<decoding::GenerationRecord>& records,
                                                  const std::vector<rewards::Score>& scores) {
  if (records.size() != scores.size()) throw ContractError("records and scores differ in length");
  std::vector<double> v;
  for (const auto& s : scores) v.push_back(s.value);
  const auto pick = choose_by_score(v);
  if (!pick) return std::nullopt;
  return PreferencePair{records[pick->chosen], records[pick->rejected], scores[pick->chosen],
                        scores[pick->rejected], records[pick->chosen].sample_id};
}

std::optional<PreferencePair> build_pair_constrained(const std::vector<decoding::GenerationRecord>& records,
                                                     const std::vector<rewards::Score>& rm_scores,
                                                     const std::vector<double>& constraint_rates) {
  if (records.size() != rm_scores.size() || records.size() != constraint_rates.size()) {
    throw ContractError("records, scores and constraint rates differ in length");
  }
  std::vector<double> v;
  for (const auto& s : rm_scores) v.push_back(s.value);
  const auto pick = choose_constrained(v, constraint_rates);
  if (!pick) return std::nullopt;
  auto cs = rm_scores[pick->chosen], rs = rm_scores[pick->rejected];
  cs.components["constraint_rate"] = constraint_rates[pick->chosen];
  rs.components["constraint_rate"] = constraint_rates[pick->rejected];
  return PreferencePair{records[pick->chosen], records[pick->rejected], cs, rs, records[pick->chosen].sample_id};
}

Dataset build_dataset(const lm::FastBase& base, const lm::FastHead& head,
                      const std::vector<data::TaskSample>& samples, int n,
                      const decoding::DecodingPolicy& policy, const rewards::Oracle& oracle,
                      std::uint64_t seed, int workers, PairRule rule) {
  if (!policy.adaptive() || policy.temp_selection != decoding::TempSelection::Sample) {
    throw ContractError("pair generation needs an adaptive policy with sampled temperatures");
  }
  if (n < 2) throw ContractError("pair generation needs at least two responses per prompt");
  struct Slot {
    std::optional<PreferencePair> pair;
    bool failed = false;
  };
  std::vector<Slot> slots(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    try {
      std::vector<decoding::GenerationRecord> recs;
      std::vector<rewards::Score> scores;
      for (int j = 0; j < n; ++j) {
        recs.push_back(decoding::generate(base, &head, samples[i], policy,
                                          {seed, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)}));
        scores.push_back(oracle.score(recs.back()));
      }
      const bool constrained =
          rule == PairRule::Constrained || (rule == PairRule::Auto && samples[i].tag == data::TaskTag::Constrained);
      if (constrained) {
        std::vector<double> rates;
        for (const auto& s : scores) {
          auto it = s.components.find("constraint_rate");
          if (it == s.components.end()) throw DataError("constrained pairing needs constraint_rate scores");
          rates.push_back(it->second);
        }
        slots[i].pair = build_pair_constrained(recs, scores, rates);
      } else {
        slots[i].pair = build_pair_by_score(recs, scores);
      }
      if (slots[i].pair) slots[i].pair->prompt_index = i;
    } catch (const Error&) {
      slots[i].failed = true;
    }
  });
  Dataset ds;
  ds.stats.prompts = samples.size();
  for (auto& s : slots) {
    if (s.failed) ++ds.stats.failed;
    else if (!s.pair) ++ds.stats.uninformative;
    else ds.pairs.push_back(std::move(*s.pair));
  }
  ds.stats.pairs = ds.pairs.size();
  return ds;
}

nlohmann::json to_json(const rewards::Score& s) { return {{"value", s.value}, {"components", s.components}}; }

rewards::Score score_from_json(const nlohmann::json& j) {
  rewards::Score s;
  s.value = j.at("value").get<double>();
  if (j.contains("components")) s.components = j.at("components").get<std::map<std::string, double>>();
  return s;
}

nlohmann::json to_json(const PreferencePair& p) {
  return {{"prompt_index", p.prompt_index},
          {"chosen", decoding::to_json(p.chosen)},
          {"rejected", decoding::to_json(p.rejected)},
          {"chosen_score", to_json(p.chosen_score)},
          {"rejected_score", to_json(p.rejected_score)}};
}

PreferencePair preference_pair_from_json(const nlohmann::json& j) {
  try {
    PreferencePair p;
    p.prompt_index = j.at("prompt_index").get<std::size_t>();
    p.chosen = decoding::generation_record_from_json(j.at("chosen"));
    p.rejected = decoding::generation_record_from_json(j.at("rejected"));
    p.chosen_score = score_from_json(j.at("chosen_score"));
    p.rejected_score = score_from_json(j.at("rejected_score"));
    if (p.chosen.prompt != p.rejected.prompt) throw DataError("pair records have different prompts");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad preference pair: ") + e.what());
  }
}

void write_pairs(const std::string& path, const std::vector<PreferencePair>& pairs, const nlohmann::json& header) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path);
  os << nlohmann::json{{"header", header}}.dump() << '\n';
  for (const auto& p : pairs) os << to_json(p).dump() << '\n';
}

std::vector<PreferencePair> read_pairs(const std::string& path, nlohmann::json* header) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  std::vector<PreferencePair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.contains("header")) {
        if (header) *header = j["header"];
        continue;
      }
      out.push_back(preference_pair_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace adec::pairs
