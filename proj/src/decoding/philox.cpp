#include "adec/decoding/philox.hpp"

namespace adec::decoding {

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53, kM1 = 0xCD9E8D57;
  constexpr std::uint32_t kW0 = 0x9E3779B9, kW1 = 0xBB67AE85;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = std::uint64_t(kM0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(kM1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

PhiloxStream::PhiloxStream(std::uint64_t seed, std::uint32_t sample_id, std::uint32_t response_index,
                           StreamTag tag)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      word2_(sample_id),
      word3_(((response_index & 0xFFFFFFu) << 8) | static_cast<std::uint8_t>(tag)) {}

void PhiloxStream::refill() {
  buf_ = philox4x32_10({static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
                        word2_, word3_},
                       key_);
  ++counter_;
  pos_ = 0;
}

std::uint32_t PhiloxStream::next_u32() {
  if (pos_ >= 4) refill();
  return buf_[pos_++];
}

double PhiloxStream::uniform() {
  // One block per draw keeps draw k of every stream aligned across policies.
  refill();
  const std::uint64_t hi = buf_[0] >> 5, lo = buf_[1] >> 6;
  pos_ = 4;
  return (hi * 67108864.0 + lo) * (1.0 / 9007199254740992.0);
}

}  // namespace adec::decoding
