// SPDX-License-Identifier: Apache-2.0
#include "reuse_inr/network.hpp"

namespace reuse_inr {

std::uint64_t MacsBreakdown::total() const {
  std::uint64_t t = stem + head;
  for (auto b : blocks) t += b;
  return t;
}

MacsBreakdown count_macs_breakdown(const NetworkConfig& c) {
  c.validate();
  using U = std::uint64_t;
  const U frames = static_cast<U>(c.frames);
  const U K2 = static_cast<U>(c.kernel_size * c.kernel_size);
  const U e = static_cast<U>(c.expansion_ratio);

  MacsBreakdown out;
  U rows = static_cast<U>(c.base_rows());
  U cols = static_cast<U>(c.base_cols());
  out.stem = frames * rows * cols * static_cast<U>(c.base_grid.channels) * static_cast<U>(c.stem_channels);

  for (std::size_t n = 0; n < c.num_blocks(); ++n) {
    rows *= static_cast<U>(c.scales[n]);
    cols *= static_cast<U>(c.scales[n]);
    const U px = frames * rows * cols;
    const U cin = static_cast<U>(c.block_input_channels(n));
    const U width = static_cast<U>(c.channels[n]);
    const bool active = c.reuse_active(n);
    const U m = active ? static_cast<U>(c.reuse.multiplier) : 1;

    U block = px * static_cast<U>(c.local_grids[n].channels) * cin;
    for (Index layer = 0; layer < c.depths[n]; ++layer) {
      const bool transition = layer == 0 && c.block_has_transition(n);
      const U ci = transition ? cin : width;
      U hidden = e * ci;
      U dw_apps = 1;
      U apps = 1;
      if (active && !transition) {
        switch (c.reuse.mode) {
          case ReuseMode::Widen: hidden *= m; break;
          case ReuseMode::Deepen:
            if (c.reuse.granularity == ReuseGranularity::ConvLayer) dw_apps = m;
            else apps = m;
            break;
          case ReuseMode::None: break;
        }
      }
      block += apps * px * (dw_apps * K2 * ci + ci * hidden + hidden * width);
    }
    out.blocks.push_back(block);
  }
  out.head = frames * rows * cols * static_cast<U>(c.head_kernel_size * c.head_kernel_size) *
             static_cast<U>(c.channels.back()) * 3u;
  return out;
}

std::uint64_t count_macs(const NetworkConfig& config) { return count_macs_breakdown(config).total(); }

std::uint64_t count_macs(const NetworkConfig& config, Index frames, Index height, Index width) {
  NetworkConfig c = config;
  c.frames = frames;
  c.height = height;
  c.width = width;
  const Index s = c.total_scale();
  if (height % s != 0 || width % s != 0) fail(ErrorKind::Config, "frame size is not divisible by the total upsampling factor");
  c.patch_rows = height / s;
  c.patch_cols = width / s;
  return count_macs_breakdown(c).total();
}

Index count_unique_params(const NetworkConfig& c) {
  c.validate();
  const Index K2 = c.kernel_size * c.kernel_size;
  Index n = c.base_grid.size() + c.stem_channels * c.base_grid.channels + c.stem_channels;
  for (std::size_t b = 0; b < c.num_blocks(); ++b) {
    const Index cin = c.block_input_channels(b);
    n += c.local_grids[b].size() + (c.local_grids[b].channels + 1) * cin;
    for (Index l = 0; l < c.depths[b]; ++l) {
      const Index ci = l == 0 ? cin : c.channels[b];
      const Index co = c.channels[b];
      const Index hidden = c.expansion_ratio * ci;
      n += (K2 + 1) * ci + 2 * ci + (ci + 1) * hidden + (hidden + 1) * co;
    }
  }
  return n + c.head_kernel_size * c.head_kernel_size * c.channels.back() * 3 + 3;
}

}  // namespace reuse_inr
