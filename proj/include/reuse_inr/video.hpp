// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reuse_inr/tensor.hpp"

namespace reuse_inr {

enum class PixelFormat { Rgb8, Float };

/// T x H x W x 3 frames, interleaved RGB in memory. Exactly one of `bytes`
/// (Rgb8) or `pixels` (Float, unit interval) holds the samples.
struct VideoBuffer {
  Index frames = 0;
  Index height = 0;
  Index width = 0;
  PixelFormat format = PixelFormat::Rgb8;
  std::vector<std::uint8_t> bytes;
  std::vector<float> pixels;

  static VideoBuffer rgb8(Index frames, Index height, Index width);
  static VideoBuffer floats(Index frames, Index height, Index width);

  Index sample_count() const { return frames * height * width * 3; }
  Index frame_samples() const { return height * width * 3; }
  /// Sample i in the unit interval.
  float unit(Index i) const {
    return format == PixelFormat::Rgb8 ? static_cast<float>(bytes[static_cast<std::size_t>(i)]) / 255.0f
                                       : pixels[static_cast<std::size_t>(i)];
  }

  VideoBuffer to_float() const;
  /// Rounds to the nearest 8-bit code after clamping to [0, 1].
  VideoBuffer to_rgb8() const;
  void clamp();
  /// One frame as an [H, W, 3] tensor in the unit interval.
  Tensor<float> frame_tensor(Index t) const;
  void set_frame(Index t, const Tensor<float>& frame);

  friend bool operator==(const VideoBuffer&, const VideoBuffer&) = default;
};

/// Joint PSNR over all samples in the unit-interval domain, capped at 100 dB.
double psnr(const VideoBuffer& a, const VideoBuffer& b);
double mse(const VideoBuffer& a, const VideoBuffer& b);
constexpr double kPsnrCap = 100.0;
inline double psnr_from_mse(double m) { return m <= 0.0 ? kPsnrCap : std::min(kPsnrCap, 10.0 * std::log10(1.0 / m)); }

/// Bits per pixel: 8 * bytes / (T * H * W).
double bpp(std::uint64_t bytes, Index frames, Index height, Index width);

enum class SynthKind { Constant, MovingGradient, BouncingBall, NoiseTextured };
const char* to_string(SynthKind kind);
SynthKind parse_synth_kind(const std::string& text);
const std::vector<SynthKind>& all_synth_kinds();

/// Horizontal pixels per frame by which moving_gradient content travels (wrapping).
constexpr Index kGradientShift = 1;

/// Deterministic synthetic RGB8 sequence.
VideoBuffer synth_video(SynthKind kind, Index frames, Index height, Index width, std::uint64_t seed);

/// `clip.rgb` -> `clip.meta`.
std::filesystem::path sidecar_path(const std::filesystem::path& raw);
/// Planar RGB8, frame-major (R plane, G plane, B plane per frame), plus a text sidecar.
void save_raw(const std::filesystem::path& path, const VideoBuffer& video);
VideoBuffer load_raw(const std::filesystem::path& path);

/// Rate-distortion sample.
struct RDPoint {
  std::string label;
  double bpp = 0.0;
  double psnr = 0.0;
};

struct BdRateResult {
  double percent = 0.0;
  /// Fewer than four points on a curve: piecewise-linear interpolation was used instead of the cubic fit.
  bool piecewise_linear = false;
};

/// Bjontegaard delta rate of `test` against `anchor`: cubic fit of log10(rate)
/// over PSNR, averaged over the shared PSNR interval. Negative means test saves rate.
BdRateResult bd_rate(const std::vector<RDPoint>& anchor, const std::vector<RDPoint>& test);

void write_rd_csv(const std::filesystem::path& path, const std::vector<RDPoint>& points);
std::vector<RDPoint> read_rd_csv(const std::filesystem::path& path);

}  // namespace reuse_inr
