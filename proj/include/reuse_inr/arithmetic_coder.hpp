// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

namespace reuse_inr {

/// Bit buffer, most significant bit of each byte first.
struct BitBuffer {
  std::vector<std::uint8_t> bytes;
  std::uint64_t bits = 0;

  void put(bool bit) {
    if (bits % 8 == 0) bytes.push_back(0);
    if (bit) bytes.back() |= static_cast<std::uint8_t>(0x80u >> (bits % 8));
    ++bits;
  }
  void put_bits(std::uint32_t value, int count) {
    for (int i = count - 1; i >= 0; --i) put((value >> i) & 1u);
  }
  bool at(std::uint64_t i) const { return (bytes[i / 8] >> (7 - i % 8)) & 1u; }
};

/// Order-0 adaptive frequency model. Every symbol starts with count 1; a coded
/// symbol gains `kIncrement`; all counts are halved (rounding up) once the total
/// exceeds `kMaxTotal`.
class AdaptiveModel {
public:
  static constexpr std::uint32_t kIncrement = 32;
  static constexpr std::uint32_t kMaxTotal = 1u << 16;

  explicit AdaptiveModel(std::uint32_t alphabet);

  std::uint32_t alphabet() const { return static_cast<std::uint32_t>(counts_.size()); }
  std::uint32_t total() const { return total_; }
  std::uint32_t count(std::uint32_t s) const { return counts_[s]; }
  /// Cumulative count of all symbols below `s`.
  std::uint32_t cumulative(std::uint32_t s) const;
  /// Symbol whose cumulative interval contains `target`.
  std::uint32_t find(std::uint32_t target) const;
  void update(std::uint32_t s);

private:
  std::vector<std::uint32_t> counts_;
  std::uint32_t total_ = 0;
};

/// 32-bit integer arithmetic coder with pending-bit carry handling.
/// Copyable, so a partially coded state can be forked.
class ArithmeticEncoder {
public:
  void encode(std::uint32_t symbol, AdaptiveModel& model);
  /// Emits the two disambiguating bits; the coder must not be used afterwards.
  void finish();
  /// Bits emitted so far; bits still pending are not included.
  const BitBuffer& output() const { return out_; }

private:
  void emit(bool bit);

  BitBuffer out_;
  std::uint64_t low_ = 0;
  std::uint64_t high_ = 0xFFFFFFFFull;
  std::uint64_t pending_ = 0;
};

class ArithmeticDecoder {
public:
  ArithmeticDecoder(const BitBuffer& in, std::uint64_t start_bit);
  std::uint32_t decode(AdaptiveModel& model);
  /// Bits the encoder must have produced for the symbols decoded so far (after finish()).
  std::uint64_t consumed_bits() const { return shifts_ + 2; }

private:
  bool next_bit();

  const BitBuffer& in_;
  std::uint64_t pos_;
  std::uint64_t low_ = 0;
  std::uint64_t high_ = 0xFFFFFFFFull;
  std::uint64_t value_ = 0;
  std::uint64_t shifts_ = 0;
};

/// Adaptive arithmetic coding of a whole sequence over [0, alphabet).
BitBuffer arithmetic_encode(const std::vector<std::uint32_t>& symbols, std::uint32_t alphabet);
/// Inverse of arithmetic_encode. Reads from `start_bit`; `available_bits` bounds the stream.
std::vector<std::uint32_t> arithmetic_decode(const BitBuffer& payload, std::uint64_t start_bit,
                                             std::uint64_t available_bits, std::uint64_t count,
                                             std::uint32_t alphabet);

/// Symbol payload: one mode bit, then either the arithmetic-coded sequence or,
/// when that would be longer, plain `bits`-wide fixed-length codes.
BitBuffer encode_stream(const std::vector<std::uint32_t>& symbols, int bits);
std::vector<std::uint32_t> decode_stream(const BitBuffer& payload, std::uint64_t count, int bits);

}  // namespace reuse_inr
