// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "reuse_inr/tensor.hpp"

namespace reuse_inr {

enum class ReuseMode { None, Deepen, Widen };
enum class ReuseGranularity { ConvLayer, ConvNeXtBlock, HiNeRVBlock };

const char* to_string(ReuseMode mode);
const char* to_string(ReuseGranularity granularity);
ReuseMode parse_reuse_mode(const std::string& text);
ReuseGranularity parse_reuse_granularity(const std::string& text);

/// How learned weights are applied more than once.
struct ReuseSpec {
  ReuseMode mode = ReuseMode::None;
  ReuseGranularity granularity = ReuseGranularity::ConvNeXtBlock;
  int multiplier = 1;
  std::vector<bool> location_mask;  // one flag per HiNeRV block

  friend bool operator==(const ReuseSpec&, const ReuseSpec&) = default;
};

/// Extent of a learned feature grid: frames x rows x cols x channels.
struct GridDims {
  Index frames = 1;
  Index rows = 1;
  Index cols = 1;
  Index channels = 1;

  Index size() const { return frames * rows * cols * channels; }
  friend bool operator==(const GridDims&, const GridDims&) = default;
};

/// Full architecture description, including the video geometry it decodes to.
///
/// Block n runs at resolution base * S_1 * ... * S_n. Its first ConvNeXt maps
/// the incoming width to channels[n]; when the widths differ that layer has no
/// residual path ("transition" layer) and is never repeated by reuse.
struct NetworkConfig {
  Index frames = 1;
  Index height = 1;
  Index width = 1;
  Index patch_rows = 1;  // patch extent at base resolution
  Index patch_cols = 1;
  GridDims base_grid;
  Index stem_channels = 1;
  std::vector<Index> depths;
  std::vector<Index> channels;
  std::vector<Index> scales;
  std::vector<GridDims> local_grids;
  Index expansion_ratio = 1;
  Index kernel_size = 3;
  Index head_kernel_size = 3;
  ReuseSpec reuse;

  std::size_t num_blocks() const { return depths.size(); }
  Index total_scale() const;
  Index base_rows() const { return height / total_scale(); }
  Index base_cols() const { return width / total_scale(); }
  Index patch_grid_rows() const { return base_rows() / patch_rows; }
  Index patch_grid_cols() const { return base_cols() / patch_cols; }
  Index output_patch_rows() const { return patch_rows * total_scale(); }
  Index output_patch_cols() const { return patch_cols * total_scale(); }

  /// Width entering block n (the stem width for n == 0).
  Index block_input_channels(std::size_t n) const { return n == 0 ? stem_channels : channels[n - 1]; }
  bool block_has_transition(std::size_t n) const { return block_input_channels(n) != channels[n]; }
  /// Number of shape-preserving ConvNeXt layers in block n.
  Index residual_layers(std::size_t n) const { return depths[n] - (block_has_transition(n) ? 1 : 0); }
  /// Whether block n may carry the reuse location flag under the configured granularity.
  bool block_reuse_eligible(std::size_t n) const;
  /// Reuse active on block n: mode set, multiplier > 1 and the block flagged.
  bool reuse_active(std::size_t n) const;

  /// Throws a configuration error describing the first violated invariant.
  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Canonical versioned key/value text. The bytes are embedded verbatim in bitstreams.
std::string to_text(const NetworkConfig& config);
NetworkConfig network_config_from_text(const std::string& text);

/// Strict `key = value` document: unknown, duplicate or missing keys are errors.
class KeyValueDoc {
public:
  static KeyValueDoc parse(const std::string& text, const std::string& expected_format);

  std::string take(const std::string& key);
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  /// Fails on any key that was never taken.
  void finish() const;

private:
  std::map<std::string, std::string> entries_;
  std::string format_;
};

std::vector<Index> parse_index_list(const std::string& key, const std::string& value);
Index parse_index(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);

/// Desk-scale default: n=4, depths {3,3,3,1}, scales {2,2,2,1}, 64x64 full-frame patches.
NetworkConfig default_network_config(Index frames = 16, Index height = 64, Index width = 64);

/// Full-size reference geometry used for decode complexity accounting:
/// depths {3,3,3,1}, first-stage width 280, 240 frames of 1920x1080.
NetworkConfig full_size_network_config();

/// Multiply-accumulate count for decoding every frame of the configured video.
std::uint64_t count_macs(const NetworkConfig& config);
/// Same architecture evaluated on a different sequence geometry.
std::uint64_t count_macs(const NetworkConfig& config, Index frames, Index height, Index width);

/// Per-block MAC breakdown (stem and head reported separately).
struct MacsBreakdown {
  std::uint64_t stem = 0;
  std::vector<std::uint64_t> blocks;
  std::uint64_t head = 0;
  std::uint64_t total() const;
};
MacsBreakdown count_macs_breakdown(const NetworkConfig& config);

}  // namespace reuse_inr
