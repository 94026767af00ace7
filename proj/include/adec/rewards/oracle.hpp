#pragma once

#include <memory>
#include <string>

#include "adec/decoding/record.hpp"
#include "adec/rewards/remote.hpp"
#include "adec/rewards/rewards.hpp"

namespace adec::rewards {

enum class OracleKind { Auto, Repeat, Arith, Diversity, Constrained, General, Remote };

std::string to_string(OracleKind k);
OracleKind oracle_kind_from_string(const std::string& s);

/// Scores generation records; higher is better for every kind.
///  repeat      -3-gram repeat rate of the response
///  arith       exact answer against the record's gold
///  diversity   distinct-2-gram ratio times grammar validity
///  constrained diversity value, with constraint_rate as a component
///  general     exact answer when the prompt is an arithmetic question (gold
///              computed from the prompt), diversity otherwise
///  auto        picks one of the above from the record's task tag
class Oracle {
 public:
  explicit Oracle(OracleKind kind = OracleKind::Auto, std::shared_ptr<RemoteScorer> remote = nullptr);
  Score score(const decoding::GenerationRecord& r) const;
  OracleKind kind() const { return kind_; }

 private:
  OracleKind kind_;
  std::shared_ptr<RemoteScorer> remote_;
};

}  // namespace adec::rewards
