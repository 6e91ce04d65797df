// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "reuse_inr/arithmetic_coder.hpp"
#include "reuse_inr/network.hpp"

namespace reuse_inr {

constexpr int kDefaultQuantBits = 6;
constexpr std::uint8_t kBitstreamVersion = 1;

/// Symmetric max-abs quantization of one tensor.
struct QuantizedTensor {
  Shape shape;
  float delta = 0.0f;
  int bits = kDefaultQuantBits;
  std::vector<std::uint32_t> symbols;

  static std::uint32_t center(int bits) { return (1u << (bits - 1)) - 1u; }
  static std::uint32_t max_symbol(int bits) { return (1u << bits) - 2u; }
};

/// Quantization step of a tensor: max|t| / (2^(bits-1) - 1), in fp32.
float quant_step(const Eigen::ArrayXf& values, int bits);

QuantizedTensor quantize_values(const Eigen::ArrayXf& values, const Shape& shape, int bits);
Eigen::ArrayXf dequantize_values(const QuantizedTensor& q);

inline QuantizedTensor quantize_tensor(const Tensor<float>& t, int bits = kDefaultQuantBits) {
  return quantize_values(t.values(), t.shape(), bits);
}
inline Tensor<float> dequantize_tensor(const QuantizedTensor& q) { return Tensor<float>(q.shape, dequantize_values(q)); }

/// Parameters as the decoder will see them: every tensor quantized and dequantized.
ParameterStore<float> quantize_parameters(const ParameterStore<float>& params, int bits = kDefaultQuantBits);

std::uint64_t fnv1a64(const std::string& text);

/// One serialized tensor record.
struct TensorRecord {
  std::uint64_t name_hash = 0;
  QuantizedTensor tensor;
};

/// Layout-level container: config text, tensor records and the coded symbol payload.
struct Bitstream {
  std::string config_text;
  std::vector<TensorRecord> records;
  BitBuffer payload;
};

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& stream);
Bitstream parse_bitstream(const std::vector<std::uint8_t>& bytes);

/// Quantize, entropy-code and serialize a model.
std::vector<std::uint8_t> pack_model(const ParameterStore<float>& params, const NetworkConfig& config,
                                     int bits = kDefaultQuantBits);

struct DecodedModel {
  NetworkConfig config;
  int bits = kDefaultQuantBits;
  std::vector<QuantizedTensor> tensors;
  ParameterStore<float> params;  // dequantized
};

DecodedModel unpack_model(const std::vector<std::uint8_t>& bytes);

}  // namespace reuse_inr
