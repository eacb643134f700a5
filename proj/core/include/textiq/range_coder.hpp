#pragma once

#include <cstdint>
#include <vector>

#include "textiq/common.hpp"

namespace textiq {

class CorruptStream : public Error {
 public:
  explicit CorruptStream(const std::string& what) : Error(what) {}
};

// Adaptive probability state for one binary context, 11-bit precision.
struct BitModel {
  std::uint16_t prob = 1024;
};

// Binary range coder (carry-less 32-bit renormalization, LZMA-style).
class RangeEncoder {
 public:
  void encode_bit(BitModel& model, int bit);
  void encode_direct(std::uint32_t value, int num_bits);  // fixed p=0.5, no adaptation

  // Magnitude >= 0 as an Elias-gamma style code with adaptive prefix bits.
  void encode_magnitude(std::vector<BitModel>& prefix_models, std::uint32_t value);

  std::vector<std::uint8_t> finish();

 private:
  void shift_low();

  std::vector<std::uint8_t> out_;
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t cache_size_ = 1;
};

class RangeDecoder {
 public:
  // The buffer must outlive the decoder. Throws CorruptStream on over-read.
  explicit RangeDecoder(const std::uint8_t* data, size_t size);

  int decode_bit(BitModel& model);
  std::uint32_t decode_direct(int num_bits);
  std::uint32_t decode_magnitude(std::vector<BitModel>& prefix_models);

 private:
  std::uint8_t next_byte();

  const std::uint8_t* data_;
  size_t size_;
  size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

}  // namespace textiq
