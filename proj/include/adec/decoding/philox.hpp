#pragma once

#include <array>
#include <cstdint>

namespace adec::decoding {

/// Philox4x32 with 10 rounds.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key);

enum class StreamTag : std::uint8_t { Token = 1, Temperature = 2, Aux = 3 };

/// Counter-based stream keyed by a run seed. The counter carries
/// (draw index, sample id, response index, tag), so every record and every
/// purpose gets an independent, schedule-free sequence.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint32_t sample_id, std::uint32_t response_index, StreamTag tag);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  std::uint32_t next_u32();
  std::uint64_t draws() const { return counter_; }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t word2_, word3_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
};

}  // namespace adec::decoding
