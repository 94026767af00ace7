#include "adec/decoding/record.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "adec/data/tokenizer.hpp"
#include "adec/errors.hpp"

namespace adec::decoding {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::FixedTemp: return "fixed";
    case Variant::AdaptiveSeq: return "adaptive_seq";
    case Variant::AdaptiveTok: return "adaptive_tok";
  }
  return "?";
}

std::string to_string(TempSelection s) { return s == TempSelection::Greedy ? "greedy" : "sample"; }

Variant variant_from_string(const std::string& s) {
  if (s == "fixed") return Variant::FixedTemp;
  if (s == "adaptive_seq") return Variant::AdaptiveSeq;
  if (s == "adaptive_tok") return Variant::AdaptiveTok;
  throw UsageError("unknown decoding variant '" + s + "' (fixed, adaptive_seq, adaptive_tok)");
}

TempSelection temp_selection_from_string(const std::string& s) {
  if (s == "greedy") return TempSelection::Greedy;
  if (s == "sample") return TempSelection::Sample;
  throw UsageError("unknown temperature selection '" + s + "' (greedy, sample)");
}

DecodingPolicy DecodingPolicy::fixed(double tau, int max_new_tokens) {
  DecodingPolicy p;
  p.variant = Variant::FixedTemp;
  p.fixed_tau = tau;
  p.max_new_tokens = max_new_tokens;
  p.validate();
  return p;
}

DecodingPolicy DecodingPolicy::adaptive(Variant v, TempSelection sel, int max_new_tokens) {
  DecodingPolicy p;
  p.variant = v;
  p.temp_selection = sel;
  p.max_new_tokens = max_new_tokens;
  p.validate();
  return p;
}

void DecodingPolicy::validate() const {
  if (max_new_tokens <= 0) throw UsageError("max_new_tokens must be positive");
  if (variant == Variant::FixedTemp && !(fixed_tau >= 0 && fixed_tau <= 2)) {
    throw UsageError("fixed temperature must lie in [0, 2]");
  }
}

std::string DecodingPolicy::describe() const {
  std::ostringstream os;
  if (variant == Variant::FixedTemp) os << "fixed(" << fixed_tau << ")";
  else os << to_string(variant) << "/" << to_string(temp_selection);
  return os.str();
}

nlohmann::json to_json(const DecodingPolicy& p) {
  nlohmann::json j{{"variant", to_string(p.variant)}, {"max_new_tokens", p.max_new_tokens}};
  if (p.variant == Variant::FixedTemp) j["tau"] = p.fixed_tau;
  else j["temp_selection"] = to_string(p.temp_selection);
  return j;
}

DecodingPolicy decoding_policy_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw UsageError("decoding policy must be an object");
  for (const auto& [k, _] : j.items()) {
    if (k != "variant" && k != "tau" && k != "temp_selection" && k != "max_new_tokens") {
      throw UsageError("unknown decoding policy key: " + k);
    }
  }
  DecodingPolicy p;
  try {
    if (j.contains("variant")) p.variant = variant_from_string(j.at("variant").get<std::string>());
    if (j.contains("tau")) {
      if (p.variant != Variant::FixedTemp) throw UsageError("tau applies only to the fixed variant");
      p.fixed_tau = j.at("tau").get<double>();
    }
    if (j.contains("temp_selection")) {
      if (p.variant == Variant::FixedTemp) throw UsageError("temp_selection applies only to adaptive variants");
      p.temp_selection = temp_selection_from_string(j.at("temp_selection").get<std::string>());
    }
    if (j.contains("max_new_tokens")) p.max_new_tokens = j.at("max_new_tokens").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("decoding policy: ") + e.what());
  }
  p.validate();
  return p;
}

double GenerationRecord::tau_at(std::size_t t) const {
  switch (variant) {
    case Variant::FixedTemp: return fixed_tau;
    case Variant::AdaptiveSeq: return grid.at(temp_index.at(0));
    case Variant::AdaptiveTok: return grid.at(temp_index.at(t));
  }
  return 0;
}

std::string GenerationRecord::response_text() const { return data::tokenizer().decode(response); }

std::vector<int> GenerationRecord::response_body() const {
  std::vector<int> r = response;
  if (!r.empty() && r.back() == data::Tokenizer::kEos) r.pop_back();
  return r;
}

void GenerationRecord::validate() const {
  if (response.size() != token_logprob.size()) throw DataError("record: response and token_logprob lengths differ");
  if (temp_index.size() != temp_logprob.size()) throw DataError("record: temp_index and temp_logprob lengths differ");
  switch (variant) {
    case Variant::FixedTemp:
      if (!temp_index.empty()) throw DataError("record: fixed-temperature record carries temperature indices");
      break;
    case Variant::AdaptiveSeq:
      if (temp_index.size() != 1) throw DataError("record: sequence-level record needs exactly one temperature index");
      break;
    case Variant::AdaptiveTok:
      if (temp_index.size() != response.size()) {
        throw DataError("record: token-level record needs one temperature index per response token");
      }
      break;
  }
  for (int k : temp_index) {
    if (k < 0 || static_cast<std::size_t>(k) >= grid.size()) throw DataError("record: temperature index out of range");
  }
}

nlohmann::json to_json(const GenerationRecord& r) {
  nlohmann::json j{{"task", data::to_string(r.task)},
                   {"prompt", r.prompt},
                   {"response", r.response},
                   {"response_text", r.response_text()},
                   {"variant", to_string(r.variant)},
                   {"temp_index", r.temp_index},
                   {"temp_logprob", r.temp_logprob},
                   {"token_logprob", r.token_logprob},
                   {"grid", r.grid},
                   {"rng_seed", r.rng_seed},
                   {"sample_id", r.sample_id},
                   {"response_index", r.response_index}};
  if (r.variant == Variant::FixedTemp) j["tau"] = r.fixed_tau;
  if (r.gold) j["gold"] = *r.gold;
  if (r.constraint) j["constraint"] = *r.constraint;
  return j;
}

GenerationRecord generation_record_from_json(const nlohmann::json& j) {
  GenerationRecord r;
  try {
    r.task = data::task_tag_from_string(j.at("task").get<std::string>());
    r.prompt = j.at("prompt").get<std::vector<int>>();
    r.response = j.at("response").get<std::vector<int>>();
    r.variant = variant_from_string(j.at("variant").get<std::string>());
    r.temp_index = j.at("temp_index").get<std::vector<int>>();
    r.temp_logprob = j.at("temp_logprob").get<std::vector<double>>();
    r.token_logprob = j.at("token_logprob").get<std::vector<double>>();
    r.grid = j.at("grid").get<std::vector<double>>();
    r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    r.sample_id = j.at("sample_id").get<std::uint32_t>();
    r.response_index = j.at("response_index").get<std::uint32_t>();
    if (j.contains("tau")) r.fixed_tau = j.at("tau").get<double>();
    if (j.contains("gold")) r.gold = j.at("gold").get<std::string>();
    if (j.contains("constraint")) r.constraint = j.at("constraint").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad generation record: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("bad generation record: ") + e.what());
  }
  r.validate();
  return r;
}

void write_records(const std::string& path, const std::vector<GenerationRecord>& recs,
                   const nlohmann::json& header) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write " + path);
  os << nlohmann::json{{"header", header}}.dump() << '\n';
  for (const auto& r : recs) os << to_json(r).dump() << '\n';
}

std::vector<GenerationRecord> read_records(const std::string& path, nlohmann::json* header) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  std::vector<GenerationRecord> out;
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
      out.push_back(generation_record_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace adec::decoding
