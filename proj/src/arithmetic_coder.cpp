// SPDX-License-Identifier: Apache-2.0
#include "reuse_inr/arithmetic_coder.hpp"

#include <string>

#include "reuse_inr/errors.hpp"

namespace reuse_inr {

namespace {

constexpr std::uint64_t kTop = 0xFFFFFFFFull;
constexpr std::uint64_t kHalf = 0x80000000ull;
constexpr std::uint64_t kQuarter = 0x40000000ull;
constexpr std::uint64_t kThreeQuarters = 0xC0000000ull;

std::uint32_t alphabet_for(int bits) {
  if (bits < 2 || bits > 8) fail(ErrorKind::Config, "symbol width must be in [2, 8], got " + std::to_string(bits));
  return (1u << bits) - 1u;
}

}  // namespace

AdaptiveModel::AdaptiveModel(std::uint32_t alphabet) : counts_(alphabet, 1u), total_(alphabet) {
  if (alphabet < 2 || alphabet > 1024) fail(ErrorKind::Config, "alphabet size must be in [2, 1024]");
}

std::uint32_t AdaptiveModel::cumulative(std::uint32_t s) const {
  std::uint32_t c = 0;
  for (std::uint32_t i = 0; i < s; ++i) c += counts_[i];
  return c;
}

std::uint32_t AdaptiveModel::find(std::uint32_t target) const {
  std::uint32_t c = 0;
  for (std::uint32_t s = 0; s < counts_.size(); ++s) {
    c += counts_[s];
    if (target < c) return s;
  }
  fail(ErrorKind::Corruption, "arithmetic decoder target outside the model range");
}

void AdaptiveModel::update(std::uint32_t s) {
  counts_[s] += kIncrement;
  total_ += kIncrement;
  if (total_ > kMaxTotal) {
    total_ = 0;
    for (auto& c : counts_) {
      c = (c + 1) / 2;
      total_ += c;
    }
  }
}

void ArithmeticEncoder::emit(bool bit) {
  out_.put(bit);
  for (; pending_ > 0; --pending_) out_.put(!bit);
}

void ArithmeticEncoder::encode(std::uint32_t symbol, AdaptiveModel& model) {
  if (symbol >= model.alphabet())
    fail(ErrorKind::Data, "symbol " + std::to_string(symbol) + " outside alphabet of " + std::to_string(model.alphabet()));
  const std::uint64_t range = high_ - low_ + 1;
  const std::uint64_t lo = model.cumulative(symbol);
  const std::uint64_t total = model.total();
  high_ = low_ + range * (lo + model.count(symbol)) / total - 1;
  low_ = low_ + range * lo / total;
  for (;;) {
    if (high_ < kHalf) {
      emit(false);
    } else if (low_ >= kHalf) {
      emit(true);
      low_ -= kHalf;
      high_ -= kHalf;
    } else if (low_ >= kQuarter && high_ < kThreeQuarters) {
      ++pending_;
      low_ -= kQuarter;
      high_ -= kQuarter;
    } else {
      break;
    }
    low_ = 2 * low_;
    high_ = 2 * high_ + 1;
  }
  model.update(symbol);
}

void ArithmeticEncoder::finish() {
  ++pending_;
  emit(low_ >= kQuarter);
}

ArithmeticDecoder::ArithmeticDecoder(const BitBuffer& in, std::uint64_t start_bit) : in_(in), pos_(start_bit) {
  for (int i = 0; i < 32; ++i) value_ = (value_ << 1) | (next_bit() ? 1u : 0u);
}

bool ArithmeticDecoder::next_bit() {
  // past the end the stream reads as zeros; the caller checks consumed_bits()
  const bool bit = pos_ < in_.bits && in_.at(pos_);
  ++pos_;
  return bit;
}

std::uint32_t ArithmeticDecoder::decode(AdaptiveModel& model) {
  const std::uint64_t range = high_ - low_ + 1;
  const std::uint64_t total = model.total();
  const std::uint64_t target = ((value_ - low_ + 1) * total - 1) / range;
  const std::uint32_t symbol = model.find(static_cast<std::uint32_t>(target));
  const std::uint64_t lo = model.cumulative(symbol);
  high_ = low_ + range * (lo + model.count(symbol)) / total - 1;
  low_ = low_ + range * lo / total;
  for (;;) {
    if (high_ < kHalf) {
    } else if (low_ >= kHalf) {
      value_ -= kHalf;
      low_ -= kHalf;
      high_ -= kHalf;
    } else if (low_ >= kQuarter && high_ < kThreeQuarters) {
      value_ -= kQuarter;
      low_ -= kQuarter;
      high_ -= kQuarter;
    } else {
      break;
    }
    low_ = 2 * low_;
    high_ = 2 * high_ + 1;
    value_ = ((2 * value_) | (next_bit() ? 1u : 0u)) & kTop;
    ++shifts_;
  }
  model.update(symbol);
  return symbol;
}

BitBuffer arithmetic_encode(const std::vector<std::uint32_t>& symbols, std::uint32_t alphabet) {
  AdaptiveModel model(alphabet);
  ArithmeticEncoder enc;
  for (auto s : symbols) enc.encode(s, model);
  enc.finish();
  return enc.output();
}

std::vector<std::uint32_t> arithmetic_decode(const BitBuffer& payload, std::uint64_t start_bit,
                                             std::uint64_t available_bits, std::uint64_t count,
                                             std::uint32_t alphabet) {
  AdaptiveModel model(alphabet);
  ArithmeticDecoder dec(payload, start_bit);
  std::vector<std::uint32_t> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    out.push_back(dec.decode(model));
    // each shift consumes one code bit, so a short stream is detected as soon as it runs dry
    if (dec.consumed_bits() > available_bits + 32)
      fail(ErrorKind::Corruption, "arithmetic payload truncated after " + std::to_string(i) + " symbols");
  }
  if (dec.consumed_bits() > available_bits)
    fail(ErrorKind::Corruption, "arithmetic payload truncated: needs " + std::to_string(dec.consumed_bits()) +
                                    " bits, has " + std::to_string(available_bits));
  return out;
}

BitBuffer encode_stream(const std::vector<std::uint32_t>& symbols, int bits) {
  const std::uint32_t alphabet = alphabet_for(bits);
  for (auto s : symbols)
    if (s >= alphabet) fail(ErrorKind::Data, "symbol " + std::to_string(s) + " outside alphabet of " + std::to_string(alphabet));
  const BitBuffer coded = arithmetic_encode(symbols, alphabet);
  const std::uint64_t raw_bits = static_cast<std::uint64_t>(symbols.size()) * static_cast<std::uint64_t>(bits);
  BitBuffer out;
  if (raw_bits < coded.bits) {
    out.put(true);
    for (auto s : symbols) out.put_bits(s, bits);
  } else {
    out.put(false);
    for (std::uint64_t i = 0; i < coded.bits; ++i) out.put(coded.at(i));
  }
  return out;
}

std::vector<std::uint32_t> decode_stream(const BitBuffer& payload, std::uint64_t count, int bits) {
  const std::uint32_t alphabet = alphabet_for(bits);
  if (payload.bits < 1) fail(ErrorKind::Corruption, "symbol payload is empty");
  if (!payload.at(0)) return arithmetic_decode(payload, 1, payload.bits - 1, count, alphabet);

  const std::uint64_t need = count * static_cast<std::uint64_t>(bits);
  if (payload.bits - 1 < need)
    fail(ErrorKind::Corruption, "raw payload truncated: needs " + std::to_string(need) + " bits, has " +
                                    std::to_string(payload.bits - 1));
  std::vector<std::uint32_t> out;
  out.reserve(count);
  std::uint64_t pos = 1;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t s = 0;
    for (int b = 0; b < bits; ++b) s = (s << 1) | (payload.at(pos++) ? 1u : 0u);
    if (s >= alphabet) fail(ErrorKind::Corruption, "raw symbol outside the alphabet");
    out.push_back(s);
  }
  return out;
}

}  // namespace reuse_inr
