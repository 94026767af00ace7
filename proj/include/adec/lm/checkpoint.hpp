#pragma once

#include <cstdint>
#include <string>

#include "adec/autodiff/params.hpp"
#include "adec/lm/config.hpp"

namespace adec::lm {

inline constexpr char kCheckpointMagic[4] = {'A', 'D', 'C', 'K'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string kind;  // "base", "head" or "base+head"
};

struct Checkpoint {
  ModelConfig config;
  CheckpointMeta meta;
  ad::ParamSet params;
};

/// Layout: magic, version byte, length-prefixed UTF-8 config JSON,
/// length-prefixed metadata JSON, tensor count, then per tensor its name,
/// rank, dims and little-endian float32 values.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace adec::lm

namespace adec::lm {

struct BaseModel;
struct AdaptiveHead;

/// Packs either or both models into one checkpoint; head parameters keep
/// their "head." prefix.
Checkpoint make_checkpoint(const BaseModel* base, const AdaptiveHead* head, CheckpointMeta meta);
bool has_base(const Checkpoint& ck);
bool has_head(const Checkpoint& ck);
BaseModel base_from(const Checkpoint& ck);
AdaptiveHead head_from(const Checkpoint& ck);

}  // namespace adec::lm
