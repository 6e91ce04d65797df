// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "reuse_inr/network_config.hpp"
#include "reuse_inr/ops.hpp"
#include "reuse_inr/tensor.hpp"

namespace reuse_inr {

/// Ordered name -> tensor map of the unique learnable tensors.
///
/// Insertion order is the serialization order; it depends only on the
/// architecture, never on reuse settings.
template <typename Scalar>
class ParameterStore {
public:
  using Entry = std::pair<std::string, Tensor<Scalar>>;

  void add(std::string name, Tensor<Scalar> t) {
    if (index_.count(name)) fail(ErrorKind::Config, "duplicate parameter '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(t));
  }

  const Tensor<Scalar>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorKind::Config, "unknown parameter '" + name + "'");
    return entries_[it->second].second;
  }
  Tensor<Scalar>& at(const std::string& name) {
    return const_cast<Tensor<Scalar>&>(static_cast<const ParameterStore&>(*this).at(name));
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  const Entry& operator[](std::size_t i) const { return entries_[i]; }
  Entry& operator[](std::size_t i) { return entries_[i]; }

  /// Number of stored scalars.
  Index scalar_count() const {
    Index n = 0;
    for (const auto& [name, t] : entries_) n += t.size();
    return n;
  }

  void zero_grad() {
    for (auto& [name, t] : entries_) t.zero_grad();
  }

  void set_requires_grad(bool on) {
    for (auto& [name, t] : entries_) t.set_requires_grad(on);
  }

  /// Deep copy; tensors in the copy are independent nodes.
  ParameterStore clone(bool requires_grad = false) const {
    ParameterStore out;
    for (const auto& [name, t] : entries_) out.add(name, t.clone(requires_grad));
    return out;
  }

  template <typename Other>
  ParameterStore<Other> cast(bool requires_grad = false) const {
    ParameterStore<Other> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<Other>(requires_grad));
    return out;
  }

private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t> index_;
};

struct ConvNeXtParamsNames {
  static std::string prefix(std::size_t block, Index layer) {
    return "blocks." + std::to_string(block) + ".layers." + std::to_string(layer) + ".";
  }
};

/// Tensors of one ConvNeXt layer.
template <typename Scalar>
struct ConvNeXtParams {
  Tensor<Scalar> dw_weight;  // [K, K, Cin]
  Tensor<Scalar> dw_bias;    // [Cin]
  Tensor<Scalar> norm_weight;
  Tensor<Scalar> norm_bias;
  Tensor<Scalar> fc1_weight;  // [e*Cin, Cin]
  Tensor<Scalar> fc1_bias;
  Tensor<Scalar> fc2_weight;  // [Cout, e*Cin]
  Tensor<Scalar> fc2_bias;

  Index in_channels() const { return dw_weight.dim(2); }
  Index out_channels() const { return fc2_weight.dim(0); }

  static ConvNeXtParams from(const ParameterStore<Scalar>& store, const std::string& prefix) {
    return {store.at(prefix + "dw.weight"),   store.at(prefix + "dw.bias"),    store.at(prefix + "norm.weight"),
            store.at(prefix + "norm.bias"),   store.at(prefix + "fc1.weight"), store.at(prefix + "fc1.bias"),
            store.at(prefix + "fc2.weight"),  store.at(prefix + "fc2.bias")};
  }
};

/// Tensors of one HiNeRV block.
template <typename Scalar>
struct BlockParams {
  Tensor<Scalar> grid;  // [Tg, Hg, Wg, Cg]
  Tensor<Scalar> grid_weight;
  Tensor<Scalar> grid_bias;
  std::vector<ConvNeXtParams<Scalar>> layers;
};

/// Structured view over a parameter store.
template <typename Scalar>
struct NetworkParams {
  Tensor<Scalar> base_grid;
  Tensor<Scalar> stem_weight;
  Tensor<Scalar> stem_bias;
  std::vector<BlockParams<Scalar>> blocks;
  Tensor<Scalar> head_weight;  // [Kh, Kh, C, 3]
  Tensor<Scalar> head_bias;

  static NetworkParams from(const NetworkConfig& cfg, const ParameterStore<Scalar>& store) {
    NetworkParams p;
    p.base_grid = store.at("base_grid");
    p.stem_weight = store.at("stem.weight");
    p.stem_bias = store.at("stem.bias");
    for (std::size_t n = 0; n < cfg.num_blocks(); ++n) {
      const std::string b = "blocks." + std::to_string(n) + ".";
      BlockParams<Scalar> block{store.at(b + "grid"), store.at(b + "grid_proj.weight"), store.at(b + "grid_proj.bias"), {}};
      for (Index l = 0; l < cfg.depths[n]; ++l)
        block.layers.push_back(ConvNeXtParams<Scalar>::from(store, ConvNeXtParamsNames::prefix(n, l)));
      p.blocks.push_back(std::move(block));
    }
    p.head_weight = store.at("head.weight");
    p.head_bias = store.at("head.bias");
    return p;
  }
};

namespace detail {

/// Uniform doubles in [0, 1) from the standardized mt19937_64 stream.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename Scalar>
Tensor<Scalar> uniform_tensor(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor<Scalar> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t.values()[i] = Scalar(bound * (2.0 * unit_uniform(rng) - 1.0));
  return t;
}

template <typename Scalar>
Tensor<Scalar> filled(Shape shape, Scalar v) {
  Tensor<Scalar> t(std::move(shape));
  t.values().setConstant(v);
  return t;
}

}  // namespace detail

/// Fresh parameters: weights, biases and grids ~ U(-a, a) with a = sqrt(1 / fan_in),
/// layer-norm scale 1 and shift 0, head bias 0.5.
template <typename Scalar = float>
ParameterStore<Scalar> init_parameters(const NetworkConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ParameterStore<Scalar> s;
  auto uni = [&](Shape shape, Index fan_in) {
    return detail::uniform_tensor<Scalar>(std::move(shape), std::sqrt(1.0 / static_cast<double>(fan_in)), rng);
  };
  const auto& g = cfg.base_grid;
  s.add("base_grid", uni({g.frames, g.rows, g.cols, g.channels}, g.channels));
  s.add("stem.weight", uni({cfg.stem_channels, g.channels}, g.channels));
  s.add("stem.bias", uni({cfg.stem_channels}, g.channels));
  const Index K = cfg.kernel_size;
  for (std::size_t n = 0; n < cfg.num_blocks(); ++n) {
    const std::string b = "blocks." + std::to_string(n) + ".";
    const auto& lg = cfg.local_grids[n];
    const Index cin = cfg.block_input_channels(n);
    s.add(b + "grid", uni({lg.frames, lg.rows, lg.cols, lg.channels}, lg.channels));
    s.add(b + "grid_proj.weight", uni({cin, lg.channels}, lg.channels));
    s.add(b + "grid_proj.bias", uni({cin}, lg.channels));
    for (Index l = 0; l < cfg.depths[n]; ++l) {
      const std::string p = ConvNeXtParamsNames::prefix(n, l);
      const Index ci = l == 0 ? cin : cfg.channels[n];
      const Index co = cfg.channels[n];
      const Index hidden = cfg.expansion_ratio * ci;
      s.add(p + "dw.weight", uni({K, K, ci}, K * K));
      s.add(p + "dw.bias", uni({ci}, K * K));
      s.add(p + "norm.weight", detail::filled<Scalar>({ci}, Scalar(1)));
      s.add(p + "norm.bias", detail::filled<Scalar>({ci}, Scalar(0)));
      s.add(p + "fc1.weight", uni({hidden, ci}, ci));
      s.add(p + "fc1.bias", uni({hidden}, ci));
      s.add(p + "fc2.weight", uni({co, hidden}, hidden));
      s.add(p + "fc2.bias", uni({co}, hidden));
    }
  }
  const Index kh = cfg.head_kernel_size;
  const Index clast = cfg.channels.back();
  s.add("head.weight", uni({kh, kh, clast, 3}, kh * kh * clast));
  s.add("head.bias", detail::filled<Scalar>({3}, Scalar(0.5)));
  return s;
}

/// Stored scalar parameter count; independent of the reuse settings.
template <typename Scalar>
Index count_unique_params(const ParameterStore<Scalar>& params) {
  return params.scalar_count();
}

/// Analytic unique-parameter count from the architecture alone.
Index count_unique_params(const NetworkConfig& cfg);

/// Patch index (row, col) in the patch grid and frame index.
struct PatchCoord {
  Index row = 0;
  Index col = 0;
  Index frame = 0;
};

/// Widened weights: fc1 and its bias stacked `copies` times along the output axis,
/// fc2 stacked along its input axis. The fc2 bias is not duplicated.
template <typename Scalar>
struct WidenedWeights {
  Tensor<Scalar> fc1_weight;
  Tensor<Scalar> fc1_bias;
  Tensor<Scalar> fc2_weight;
};

template <typename Scalar>
WidenedWeights<Scalar> widened_weights(Tape<Scalar>& tape, const Tensor<Scalar>& w1, const Tensor<Scalar>& b1,
                                       const Tensor<Scalar>& w2, int copies = 2) {
  detail::expect_rank(w1.shape(), 2, "widened_weights", "W1");
  detail::expect_rank(w2.shape(), 2, "widened_weights", "W2");
  detail::expect_axis(w1.dim(0), w2.dim(1), "widened_weights", "W1 output vs W2 input");
  detail::expect_axis(b1.dim(0), w1.dim(0), "widened_weights", "b1 vs W1 output");
  if (copies < 1) fail(ErrorKind::Config, "widened_weights: copies must be >= 1");
  WidenedWeights<Scalar> out{w1, b1, w2};
  for (int c = 1; c < copies; ++c) {
    out.fc1_weight = concat(tape, out.fc1_weight, w1, 0);
    out.fc1_bias = concat(tape, out.fc1_bias, b1, 0);
    out.fc2_weight = concat(tape, out.fc2_weight, w2, 1);
  }
  return out;
}

/// Options for a single ConvNeXt application.
struct ConvNeXtApply {
  int dw_repeats = 1;     // fine-grained reuse: depthwise conv applied this many times
  int hidden_copies = 1;  // widening: fc1/fc2 concatenated this many times
};

/// x + fc2(gelu(fc1(norm(dwconv(x))))); the residual path is dropped when the
/// layer changes the width. `x` covers `in`, the result covers `out`.
template <typename Scalar>
Tensor<Scalar> convnext_forward(Tape<Scalar>& tape, const Tensor<Scalar>& x, const ConvNeXtParams<Scalar>& p,
                                const Region& in, const Region& out, ConvNeXtApply opts = {}) {
  detail::expect_rank(x.shape(), 3, "convnext_forward", "input");
  detail::expect_axis(x.dim(2), p.in_channels(), "convnext_forward", "2 (channels)");
  if (opts.dw_repeats < 1) fail(ErrorKind::Config, "convnext_forward: dw_repeats must be >= 1");
  const Index r = p.dw_weight.dim(0) / 2;
  Tensor<Scalar> h = x;
  Region cur = in;
  for (int k = 0; k < opts.dw_repeats; ++k) {
    const Region next = out.expanded(r * (opts.dw_repeats - 1 - k));
    h = depthwise_conv2d(tape, h, p.dw_weight, p.dw_bias, cur, next);
    cur = next;
  }
  h = layer_norm(tape, h, p.norm_weight, p.norm_bias);
  if (opts.hidden_copies > 1) {
    const auto w = widened_weights(tape, p.fc1_weight, p.fc1_bias, p.fc2_weight, opts.hidden_copies);
    h = gelu(tape, linear(tape, h, w.fc1_weight, w.fc1_bias));
    h = linear(tape, h, w.fc2_weight, p.fc2_bias);
  } else {
    h = gelu(tape, linear(tape, h, p.fc1_weight, p.fc1_bias));
    h = linear(tape, h, p.fc2_weight, p.fc2_bias);
  }
  if (p.in_channels() != p.out_channels()) return h;
  return add(tape, crop(tape, x, in, out), h);
}

/// Whole-frame ConvNeXt layer.
template <typename Scalar>
Tensor<Scalar> convnext_forward(Tape<Scalar>& tape, const Tensor<Scalar>& x, const ConvNeXtParams<Scalar>& p) {
  detail::expect_rank(x.shape(), 3, "convnext_forward", "input");
  const Region full = Region::full(x.dim(0), x.dim(1));
  return convnext_forward(tape, x, p, full, full);
}

/// ConvNeXt^m: the same layer applied m times in sequence.
template <typename Scalar>
Tensor<Scalar> deepened_forward(Tape<Scalar>& tape, const Tensor<Scalar>& x, const ConvNeXtParams<Scalar>& p, int m,
                                const Region& in, const Region& out) {
  if (m < 1) fail(ErrorKind::Config, "deepened_forward: multiplier must be >= 1, got " + std::to_string(m));
  if (m > 1 && p.in_channels() != p.out_channels())
    fail(ErrorKind::Config, "deepened_forward: a width-changing layer cannot be repeated");
  const Index r = p.dw_weight.dim(0) / 2;
  Tensor<Scalar> h = x;
  Region cur = in;
  for (int k = 0; k < m; ++k) {
    const Region next = out.expanded(r * (m - 1 - k));
    h = convnext_forward(tape, h, p, cur, next);
    cur = next;
  }
  return h;
}

template <typename Scalar>
Tensor<Scalar> deepened_forward(Tape<Scalar>& tape, const Tensor<Scalar>& x, const ConvNeXtParams<Scalar>& p, int m) {
  detail::expect_rank(x.shape(), 3, "deepened_forward", "input");
  const Region full = Region::full(x.dim(0), x.dim(1));
  return deepened_forward(tape, x, p, m, full, full);
}

/// Whole-frame ConvNeXt layer with hidden width multiplied by `copies` through weight concatenation.
template <typename Scalar>
Tensor<Scalar> widened_convnext_forward(Tape<Scalar>& tape, const Tensor<Scalar>& x, const ConvNeXtParams<Scalar>& p,
                                        int copies = 2) {
  detail::expect_rank(x.shape(), 3, "widened_convnext_forward", "input");
  const Region full = Region::full(x.dim(0), x.dim(1));
  return convnext_forward(tape, x, p, full, full, ConvNeXtApply{1, copies});
}

/// Frame size of the lattice entering block n (n == num_blocks gives the output frame).
inline std::pair<Index, Index> stage_frame(const NetworkConfig& cfg, std::size_t n) {
  Index rows = cfg.base_rows();
  Index cols = cfg.base_cols();
  for (std::size_t i = 0; i < n; ++i) {
    rows *= cfg.scales[i];
    cols *= cfg.scales[i];
  }
  return {rows, cols};
}

/// Depthwise convolutions applied in block n, counting reuse repeats.
inline Index block_conv_applications(const NetworkConfig& cfg, std::size_t n) {
  const bool active = cfg.reuse_active(n);
  const Index m = active ? cfg.reuse.multiplier : 1;
  const bool transition = cfg.block_has_transition(n);
  const Index residual = cfg.residual_layers(n);
  const Index fixed = transition ? 1 : 0;
  if (!active || cfg.reuse.mode == ReuseMode::Widen) return cfg.depths[n];
  if (cfg.reuse.granularity == ReuseGranularity::HiNeRVBlock) return cfg.depths[n] * m;
  return fixed + residual * m;
}

/// Window of the lower-resolution frame read when bilinearly upsampling `out` by `scale`.
inline Region upsample_source(const Region& out, Index scale, Index src_rows, Index src_cols) {
  const auto top = detail::sample_axis(out.row0, out.frame_rows, src_rows);
  const auto bottom = detail::sample_axis(out.row_end() - 1, out.frame_rows, src_rows);
  const auto left = detail::sample_axis(out.col0, out.frame_cols, src_cols);
  const auto right = detail::sample_axis(out.col_end() - 1, out.frame_cols, src_cols);
  (void)scale;
  return Region{top.lo, left.lo, bottom.hi - top.lo + 1, right.hi - left.lo + 1, src_rows, src_cols};
}

/// X_0: the base grid read at the patch lattice, mapped to the stem width.
template <typename Scalar>
Tensor<Scalar> stem(Tape<Scalar>& tape, const NetworkConfig& cfg, const NetworkParams<Scalar>& p, Index frame,
                    const Region& at) {
  return linear(tape, sample_grid(tape, p.base_grid, frame, cfg.frames, at), p.stem_weight, p.stem_bias);
}

template <typename Scalar>
Tensor<Scalar> stem(Tape<Scalar>& tape, const NetworkConfig& cfg, const NetworkParams<Scalar>& p, PatchCoord c) {
  if (c.frame < 0 || c.frame >= cfg.frames || c.row < 0 || c.row >= cfg.patch_grid_rows() || c.col < 0 ||
      c.col >= cfg.patch_grid_cols())
    fail(ErrorKind::Index, "patch coordinate (" + std::to_string(c.row) + "," + std::to_string(c.col) + "," +
                               std::to_string(c.frame) + ") is outside the video");
  const Region at{c.row * cfg.patch_rows, c.col * cfg.patch_cols, cfg.patch_rows, cfg.patch_cols, cfg.base_rows(),
                  cfg.base_cols()};
  return stem(tape, cfg, p, c.frame, at);
}

/// One HiNeRV block: upsample, add the projected local grid, run the ConvNeXt
/// stack with the configured reuse. `x` covers `in` on the previous stage's
/// frame; the result covers `out` on this block's frame.
template <typename Scalar>
Tensor<Scalar> hinerv_block_forward(Tape<Scalar>& tape, const NetworkConfig& cfg, const NetworkParams<Scalar>& p,
                                    std::size_t n, const Tensor<Scalar>& x, Index frame, const Region& in,
                                    const Region& out) {
  const auto& block = p.blocks[n];
  const Index r = cfg.kernel_size / 2;
  Index remaining = block_conv_applications(cfg, n);
  const Region up = out.expanded(r * remaining);
  Tensor<Scalar> h = bilinear_upsample(tape, x, cfg.scales[n], in, up);
  const Tensor<Scalar> grid =
      linear(tape, sample_grid(tape, block.grid, frame, cfg.frames, up), block.grid_weight, block.grid_bias);
  Region cur = up;

  const bool active = cfg.reuse_active(n);
  const int m = active ? cfg.reuse.multiplier : 1;
  const bool whole_block = active && cfg.reuse.mode == ReuseMode::Deepen &&
                           cfg.reuse.granularity == ReuseGranularity::HiNeRVBlock;
  const int block_reps = whole_block ? m : 1;

  for (int rep = 0; rep < block_reps; ++rep) {
    h = add(tape, h, crop(tape, grid, up, cur));
    for (Index l = 0; l < cfg.depths[n]; ++l) {
      const auto& layer = block.layers[static_cast<std::size_t>(l)];
      const bool residual = layer.in_channels() == layer.out_channels();
      ConvNeXtApply opts;
      int apps = 1;
      if (active && residual && !whole_block) {
        if (cfg.reuse.mode == ReuseMode::Widen) opts.hidden_copies = m;
        else if (cfg.reuse.granularity == ReuseGranularity::ConvLayer) opts.dw_repeats = m;
        else apps = m;
      }
      const Index used = static_cast<Index>(apps) * opts.dw_repeats;
      remaining -= used;
      const Region next = out.expanded(r * remaining);
      if (apps > 1) h = deepened_forward(tape, h, layer, apps, cur, next);
      else h = convnext_forward(tape, h, layer, cur, next, opts);
      cur = next;
    }
  }
  return h;
}

/// Whole-frame HiNeRV block on frame `frame`.
template <typename Scalar>
Tensor<Scalar> hinerv_block_forward(Tape<Scalar>& tape, const NetworkConfig& cfg, const NetworkParams<Scalar>& p,
                                    std::size_t n, const Tensor<Scalar>& x, Index frame) {
  const auto [rows, cols] = stage_frame(cfg, n);
  const auto [orows, ocols] = stage_frame(cfg, n + 1);
  return hinerv_block_forward(tape, cfg, p, n, x, frame, Region::full(rows, cols), Region::full(orows, ocols));
}

/// Regions each stage must produce so that the final patch is exact.
/// Entry 0 is the stem window, entry n+1 the output of block n, the last the head output.
inline std::vector<Region> plan_patch_regions(const NetworkConfig& cfg, PatchCoord c) {
  const std::size_t n = cfg.num_blocks();
  std::vector<Region> regions(n + 2);
  const auto [frows, fcols] = stage_frame(cfg, n);
  const Region patch{c.row * cfg.output_patch_rows(), c.col * cfg.output_patch_cols(), cfg.output_patch_rows(),
                     cfg.output_patch_cols(), frows, fcols};
  regions[n + 1] = patch;
  regions[n] = patch.expanded(cfg.head_kernel_size / 2);
  for (std::size_t b = n; b-- > 0;) {
    const Region up = regions[b + 1].expanded((cfg.kernel_size / 2) * block_conv_applications(cfg, b));
    const auto [rows, cols] = stage_frame(cfg, b);
    regions[b] = upsample_source(up, cfg.scales[b], rows, cols);
  }
  return regions;
}

/// RGB prediction [h, w, 3] for one patch, unclamped.
template <typename Scalar>
Tensor<Scalar> forward_patch(Tape<Scalar>& tape, const NetworkConfig& cfg, const NetworkParams<Scalar>& p,
                             PatchCoord c) {
  if (c.frame < 0 || c.frame >= cfg.frames || c.row < 0 || c.row >= cfg.patch_grid_rows() || c.col < 0 ||
      c.col >= cfg.patch_grid_cols())
    fail(ErrorKind::Index, "patch coordinate (" + std::to_string(c.row) + "," + std::to_string(c.col) + "," +
                               std::to_string(c.frame) + ") is outside the video");
  const auto regions = plan_patch_regions(cfg, c);
  const std::size_t n = cfg.num_blocks();
  Tensor<Scalar> h = stem(tape, cfg, p, c.frame, regions[0]);
  for (std::size_t b = 0; b < n; ++b) h = hinerv_block_forward(tape, cfg, p, b, h, c.frame, regions[b], regions[b + 1]);
  return conv2d(tape, h, p.head_weight, p.head_bias, regions[n], regions[n + 1]);
}

template <typename Scalar>
Tensor<Scalar> forward_patch(Tape<Scalar>& tape, const NetworkConfig& cfg, const ParameterStore<Scalar>& store,
                             PatchCoord c) {
  return forward_patch(tape, cfg, NetworkParams<Scalar>::from(cfg, store), c);
}

/// Full frame [H, W, 3] assembled from its patches in raster order, unclamped.
template <typename Scalar>
Tensor<Scalar> forward_frame(Tape<Scalar>& tape, const NetworkConfig& cfg, const NetworkParams<Scalar>& p, Index frame) {
  const Index ph = cfg.output_patch_rows(), pw = cfg.output_patch_cols();
  if (cfg.patch_grid_rows() == 1 && cfg.patch_grid_cols() == 1) return forward_patch(tape, cfg, p, PatchCoord{0, 0, frame});
  Tensor<Scalar> out(Shape{cfg.height, cfg.width, 3});
  for (Index i = 0; i < cfg.patch_grid_rows(); ++i) {
    for (Index j = 0; j < cfg.patch_grid_cols(); ++j) {
      const Tensor<Scalar> y = forward_patch(tape, cfg, p, PatchCoord{i, j, frame});
      for (Index r = 0; r < ph; ++r)
        out.values().segment(((i * ph + r) * cfg.width + j * pw) * 3, pw * 3) = y.values().segment(r * pw * 3, pw * 3);
    }
  }
  return out;
}

}  // namespace reuse_inr
