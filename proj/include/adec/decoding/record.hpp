#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "adec/data/tasks.hpp"

namespace adec::decoding {

enum class Variant { FixedTemp, AdaptiveSeq, AdaptiveTok };
enum class TempSelection { Greedy, Sample };

std::string to_string(Variant v);
std::string to_string(TempSelection s);
Variant variant_from_string(const std::string& s);
TempSelection temp_selection_from_string(const std::string& s);

struct DecodingPolicy {
  Variant variant = Variant::AdaptiveTok;
  double fixed_tau = 0.0;  // FixedTemp only
  TempSelection temp_selection = TempSelection::Greedy;
  int max_new_tokens = 64;

  static DecodingPolicy fixed(double tau, int max_new_tokens = 64);
  static DecodingPolicy adaptive(Variant v, TempSelection sel, int max_new_tokens = 64);
  bool adaptive() const { return variant != Variant::FixedTemp; }
  void validate() const;
  std::string describe() const;
};

nlohmann::json to_json(const DecodingPolicy& p);
DecodingPolicy decoding_policy_from_json(const nlohmann::json& j);

struct GenerationRecord {
  data::TaskTag task = data::TaskTag::Arith;
  std::vector<int> prompt;
  std::vector<int> response;           // includes EOS when generation stopped on it
  std::vector<int> temp_index;         // one per response token, one, or none
  std::vector<double> temp_logprob;    // aligned with temp_index
  std::vector<double> token_logprob;   // aligned with response
  std::vector<double> grid;            // grid the indices refer to (empty for FixedTemp)
  Variant variant = Variant::FixedTemp;
  double fixed_tau = 0.0;
  std::uint64_t rng_seed = 0;
  std::uint32_t sample_id = 0;
  std::uint32_t response_index = 0;
  std::optional<std::string> gold;
  std::optional<int> constraint;

  /// Temperature used at response step t.
  double tau_at(std::size_t t) const;
  std::string response_text() const;
  /// Response tokens with a trailing EOS removed.
  std::vector<int> response_body() const;
  void validate() const;
};

nlohmann::json to_json(const GenerationRecord& r);
GenerationRecord generation_record_from_json(const nlohmann::json& j);

void write_records(const std::string& path, const std::vector<GenerationRecord>& recs,
                   const nlohmann::json& header);
std::vector<GenerationRecord> read_records(const std::string& path, nlohmann::json* header = nullptr);

}  // namespace adec::decoding
