#include "textiq/range_coder.hpp"

namespace textiq {

namespace {
constexpr std::uint32_t kTopValue = 1u << 24;
constexpr int kModelBits = 11;
constexpr int kAdaptShift = 5;
constexpr int kMaxMagnitudeBits = 24;
}  // namespace

// ---- encoder ----------------------------------------------------------

void RangeEncoder::shift_low() {
  if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    std::uint8_t temp = cache_;
    const std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
    do {
      out_.push_back(static_cast<std::uint8_t>(temp + carry));
      temp = 0xFF;
    } while (--cache_size_ != 0);
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  }
  ++cache_size_;
  low_ = (low_ & 0x00FFFFFFull) << 8;
}

void RangeEncoder::encode_bit(BitModel& model, int bit) {
  const std::uint32_t bound = (range_ >> kModelBits) * model.prob;
  if (bit == 0) {
    range_ = bound;
    model.prob += ((1u << kModelBits) - model.prob) >> kAdaptShift;
  } else {
    low_ += bound;
    range_ -= bound;
    model.prob -= model.prob >> kAdaptShift;
  }
  while (range_ < kTopValue) {
    range_ <<= 8;
    shift_low();
  }
}

void RangeEncoder::encode_direct(std::uint32_t value, int num_bits) {
  for (int i = num_bits - 1; i >= 0; --i) {
    range_ >>= 1;
    if ((value >> i) & 1u) low_ += range_;
    while (range_ < kTopValue) {
      range_ <<= 8;
      shift_low();
    }
  }
}

void RangeEncoder::encode_magnitude(std::vector<BitModel>& prefix_models, std::uint32_t value) {
  // Elias-gamma split: (value+1) has b significant bits; b-1 adaptive
  // continuation bits followed by b-1 direct mantissa bits.
  const std::uint32_t v = value + 1;
  int bits = 0;
  while ((v >> bits) > 1u) ++bits;
  require(bits < kMaxMagnitudeBits, "magnitude too large for the coder");
  if (prefix_models.size() < static_cast<size_t>(bits + 1)) {
    prefix_models.resize(bits + 1);
  }
  for (int i = 0; i < bits; ++i) encode_bit(prefix_models[i], 1);
  encode_bit(prefix_models[bits], 0);
  if (bits > 0) encode_direct(v & ((1u << bits) - 1u), bits);
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(out_);
}

// ---- decoder ----------------------------------------------------------

RangeDecoder::RangeDecoder(const std::uint8_t* data, size_t size) : data_(data), size_(size) {
  next_byte();  // LZMA convention: the first emitted byte is always zero
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= size_) throw CorruptStream("range decoder read past end of payload");
  return data_[pos_++];
}

int RangeDecoder::decode_bit(BitModel& model) {
  const std::uint32_t bound = (range_ >> kModelBits) * model.prob;
  int bit;
  if (code_ < bound) {
    range_ = bound;
    model.prob += ((1u << kModelBits) - model.prob) >> kAdaptShift;
    bit = 0;
  } else {
    code_ -= bound;
    range_ -= bound;
    model.prob -= model.prob >> kAdaptShift;
    bit = 1;
  }
  while (range_ < kTopValue) {
    range_ <<= 8;
    code_ = (code_ << 8) | next_byte();
  }
  return bit;
}

std::uint32_t RangeDecoder::decode_direct(int num_bits) {
  std::uint32_t result = 0;
  for (int i = 0; i < num_bits; ++i) {
    range_ >>= 1;
    code_ -= range_;
    const std::uint32_t t = 0u - (code_ >> 31);
    code_ += range_ & t;
    result = (result << 1) + (t + 1);
    while (range_ < kTopValue) {
      range_ <<= 8;
      code_ = (code_ << 8) | next_byte();
    }
  }
  return result;
}

std::uint32_t RangeDecoder::decode_magnitude(std::vector<BitModel>& prefix_models) {
  int bits = 0;
  while (true) {
    if (prefix_models.size() < static_cast<size_t>(bits + 1)) prefix_models.resize(bits + 1);
    if (decode_bit(prefix_models[bits]) == 0) break;
    ++bits;
    if (bits >= kMaxMagnitudeBits) throw CorruptStream("implausible magnitude prefix");
  }
  std::uint32_t v = 1;
  if (bits > 0) v = (1u << bits) | decode_direct(bits);
  return v - 1;
}

}  // namespace textiq
