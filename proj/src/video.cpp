// SPDX-License-Identifier: Apache-2.0
#include "reuse_inr/video.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "reuse_inr/network_config.hpp"

namespace reuse_inr {

namespace {

constexpr const char* kRawFormat = "reuse-inr-raw/1";

void check_dims(Index t, Index h, Index w) {
  if (t <= 0 || h <= 0 || w <= 0)
    fail(ErrorKind::Config, "video dims must be positive, got " + std::to_string(t) + "x" + std::to_string(h) + "x" +
                                std::to_string(w));
}

void check_same_dims(const VideoBuffer& a, const VideoBuffer& b, const char* op) {
  if (a.frames != b.frames || a.height != b.height || a.width != b.width)
    fail(ErrorKind::Dimension, std::string(op) + ": video dims differ (" + std::to_string(a.frames) + "x" +
                                   std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                                   std::to_string(b.frames) + "x" + std::to_string(b.height) + "x" +
                                   std::to_string(b.width) + ")");
}

std::uint8_t to_code(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

VideoBuffer VideoBuffer::rgb8(Index frames, Index height, Index width) {
  check_dims(frames, height, width);
  VideoBuffer v;
  v.frames = frames;
  v.height = height;
  v.width = width;
  v.format = PixelFormat::Rgb8;
  v.bytes.assign(static_cast<std::size_t>(v.sample_count()), 0);
  return v;
}

VideoBuffer VideoBuffer::floats(Index frames, Index height, Index width) {
  check_dims(frames, height, width);
  VideoBuffer v;
  v.frames = frames;
  v.height = height;
  v.width = width;
  v.format = PixelFormat::Float;
  v.pixels.assign(static_cast<std::size_t>(v.sample_count()), 0.0f);
  return v;
}

VideoBuffer VideoBuffer::to_float() const {
  if (format == PixelFormat::Float) return *this;
  VideoBuffer v = floats(frames, height, width);
  for (Index i = 0; i < sample_count(); ++i) v.pixels[static_cast<std::size_t>(i)] = unit(i);
  return v;
}

VideoBuffer VideoBuffer::to_rgb8() const {
  if (format == PixelFormat::Rgb8) return *this;
  VideoBuffer v = rgb8(frames, height, width);
  for (Index i = 0; i < sample_count(); ++i) v.bytes[static_cast<std::size_t>(i)] = to_code(unit(i));
  return v;
}

void VideoBuffer::clamp() {
  for (auto& p : pixels) p = std::clamp(p, 0.0f, 1.0f);
}

Tensor<float> VideoBuffer::frame_tensor(Index t) const {
  if (t < 0 || t >= frames) fail(ErrorKind::Index, "frame " + std::to_string(t) + " outside the video");
  Tensor<float> out(Shape{height, width, 3});
  const Index off = t * frame_samples();
  for (Index i = 0; i < frame_samples(); ++i) out.values()[i] = unit(off + i);
  return out;
}

void VideoBuffer::set_frame(Index t, const Tensor<float>& frame) {
  if (t < 0 || t >= frames) fail(ErrorKind::Index, "frame " + std::to_string(t) + " outside the video");
  if (frame.shape() != Shape{height, width, 3})
    fail(ErrorKind::Dimension, "frame shape " + shape_string(frame.shape()) + " does not match the video");
  const Index off = t * frame_samples();
  for (Index i = 0; i < frame_samples(); ++i) {
    if (format == PixelFormat::Float) pixels[static_cast<std::size_t>(off + i)] = frame.values()[i];
    else bytes[static_cast<std::size_t>(off + i)] = to_code(frame.values()[i]);
  }
}

double mse(const VideoBuffer& a, const VideoBuffer& b) {
  check_same_dims(a, b, "psnr");
  double acc = 0.0;
  for (Index i = 0; i < a.sample_count(); ++i) {
    const double d = static_cast<double>(a.unit(i)) - static_cast<double>(b.unit(i));
    acc += d * d;
  }
  return acc / static_cast<double>(a.sample_count());
}

double psnr(const VideoBuffer& a, const VideoBuffer& b) { return psnr_from_mse(mse(a, b)); }

double bpp(std::uint64_t bytes, Index frames, Index height, Index width) {
  check_dims(frames, height, width);
  return 8.0 * static_cast<double>(bytes) / (static_cast<double>(frames) * static_cast<double>(height) * static_cast<double>(width));
}

const char* to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::Constant: return "constant";
    case SynthKind::MovingGradient: return "moving_gradient";
    case SynthKind::BouncingBall: return "bouncing_ball";
    case SynthKind::NoiseTextured: return "noise_textured";
  }
  return "?";
}

SynthKind parse_synth_kind(const std::string& text) {
  for (auto k : all_synth_kinds())
    if (text == to_string(k)) return k;
  fail(ErrorKind::Usage, "unknown synthetic kind '" + text + "' (constant, moving_gradient, bouncing_ball, noise_textured)");
}

const std::vector<SynthKind>& all_synth_kinds() {
  static const std::vector<SynthKind> kinds = {SynthKind::Constant, SynthKind::MovingGradient, SynthKind::BouncingBall,
                                               SynthKind::NoiseTextured};
  return kinds;
}

VideoBuffer synth_video(SynthKind kind, Index frames, Index height, Index width, std::uint64_t seed) {
  VideoBuffer v = VideoBuffer::rgb8(frames, height, width);
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  auto put = [&](Index t, Index y, Index x, double r, double g, double b) {
    const std::size_t o = static_cast<std::size_t>(((t * height + y) * width + x) * 3);
    v.bytes[o] = to_code(r);
    v.bytes[o + 1] = to_code(g);
    v.bytes[o + 2] = to_code(b);
  };

  switch (kind) {
    case SynthKind::Constant: {
      const double r = uni(0.15, 0.85), g = uni(0.15, 0.85), b = uni(0.15, 0.85);
      for (Index t = 0; t < frames; ++t)
        for (Index y = 0; y < height; ++y)
          for (Index x = 0; x < width; ++x) put(t, y, x, r, g, b);
      break;
    }
    case SynthKind::MovingGradient: {
      // one horizontal period so the wrap-around shift stays smooth
      const double phase = uni(0.0, kTwoPi);
      const double tilt = uni(0.2, 0.6);
      for (Index t = 0; t < frames; ++t)
        for (Index y = 0; y < height; ++y)
          for (Index x = 0; x < width; ++x) {
            const Index xs = (x + kGradientShift * t) % width;
            const double u = kTwoPi * static_cast<double>(xs) / static_cast<double>(width) + phase;
            const double w = static_cast<double>(y) / static_cast<double>(height);
            put(t, y, x, 0.5 + 0.35 * std::cos(u), 0.5 + 0.35 * std::sin(u) * (1.0 - tilt * w), 0.25 + 0.5 * w);
          }
      break;
    }
    case SynthKind::BouncingBall: {
      const double radius = 0.18 * static_cast<double>(std::min(height, width));
      const double vx = uni(1.0, 2.5), vy = uni(1.0, 2.5);
      const double x0 = uni(radius, width - radius), y0 = uni(radius, height - radius);
      const double br = uni(0.6, 0.9), bg = uni(0.2, 0.5), bb = uni(0.2, 0.5);
      // reflect a linear path into [lo, hi]
      auto bounce = [](double p, double lo, double hi) {
        const double span = hi - lo;
        double q = std::fmod(p - lo, 2.0 * span);
        if (q < 0) q += 2.0 * span;
        return lo + (q <= span ? q : 2.0 * span - q);
      };
      for (Index t = 0; t < frames; ++t) {
        const double cx = bounce(x0 + vx * t, radius, width - radius);
        const double cy = bounce(y0 + vy * t, radius, height - radius);
        for (Index y = 0; y < height; ++y)
          for (Index x = 0; x < width; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double a = std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius * 0.35));
            const double bg_level = 0.2 + 0.2 * static_cast<double>(y) / static_cast<double>(height);
            put(t, y, x, bg_level + a * (br - bg_level), bg_level + a * (bg - bg_level), 0.3 + a * (bb - 0.3));
          }
      }
      break;
    }
    case SynthKind::NoiseTextured: {
      // a few drifting low-frequency waves per channel
      constexpr int kWaves = 4;
      double fx[3][kWaves], fy[3][kWaves], ph[3][kWaves], amp[3][kWaves], drift[3][kWaves];
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < kWaves; ++k) {
          fx[c][k] = std::floor(uni(0.0, 3.0));
          fy[c][k] = std::floor(uni(0.0, 3.0));
          ph[c][k] = uni(0.0, kTwoPi);
          amp[c][k] = uni(0.04, 0.1);
          drift[c][k] = uni(-0.15, 0.15);
        }
      for (Index t = 0; t < frames; ++t)
        for (Index y = 0; y < height; ++y)
          for (Index x = 0; x < width; ++x) {
            double rgb[3];
            for (int c = 0; c < 3; ++c) {
              double s = 0.5;
              for (int k = 0; k < kWaves; ++k)
                s += amp[c][k] * std::sin(kTwoPi * (fx[c][k] * x / double(width) + fy[c][k] * y / double(height)) +
                                          ph[c][k] + drift[c][k] * t);
              rgb[c] = s;
            }
            put(t, y, x, rgb[0], rgb[1], rgb[2]);
          }
      break;
    }
  }
  return v;
}

std::filesystem::path sidecar_path(const std::filesystem::path& raw) {
  auto p = raw;
  p.replace_extension(".meta");
  return p;
}

void save_raw(const std::filesystem::path& path, const VideoBuffer& video) {
  const VideoBuffer v = video.to_rgb8();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  const Index plane = v.height * v.width;
  std::vector<std::uint8_t> frame(static_cast<std::size_t>(plane * 3));
  for (Index t = 0; t < v.frames; ++t) {
    for (Index p = 0; p < plane; ++p)
      for (Index c = 0; c < 3; ++c)
        frame[static_cast<std::size_t>(c * plane + p)] = v.bytes[static_cast<std::size_t>((t * plane + p) * 3 + c)];
    out.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
  }
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
  std::ofstream meta(sidecar_path(path));
  meta << "format = " << kRawFormat << "\nwidth = " << v.width << "\nheight = " << v.height << "\nframes = " << v.frames
       << "\npixel_format = rgb24_planar\n";
  if (!meta) fail(ErrorKind::Io, "cannot write " + sidecar_path(path).string());
}

VideoBuffer load_raw(const std::filesystem::path& path) {
  std::ifstream meta(sidecar_path(path));
  if (!meta) fail(ErrorKind::Io, "missing sidecar " + sidecar_path(path).string());
  std::stringstream ss;
  ss << meta.rdbuf();
  KeyValueDoc doc = [&] {
    try {
      return KeyValueDoc::parse(ss.str(), kRawFormat);
    } catch (const Error& e) {
      fail(ErrorKind::Format, std::string("sidecar: ") + e.what());
    }
  }();
  Index w = 0, h = 0, t = 0;
  try {
    w = parse_index("width", doc.take("width"));
    h = parse_index("height", doc.take("height"));
    t = parse_index("frames", doc.take("frames"));
    if (doc.take("pixel_format") != "rgb24_planar") fail(ErrorKind::Format, "sidecar: only rgb24_planar is supported");
    doc.finish();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) throw;
    fail(ErrorKind::Format, std::string("sidecar: ") + e.what());
  }
  if (w <= 0 || h <= 0 || t <= 0) fail(ErrorKind::Format, "sidecar: dims must be positive");

  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t want = static_cast<std::size_t>(t * h * w * 3);
  if (raw.size() != want)
    fail(ErrorKind::Format, path.string() + " holds " + std::to_string(raw.size()) + " bytes, the sidecar declares " +
                                std::to_string(want));
  VideoBuffer v = VideoBuffer::rgb8(t, h, w);
  const Index plane = h * w;
  for (Index f = 0; f < t; ++f)
    for (Index c = 0; c < 3; ++c)
      for (Index p = 0; p < plane; ++p)
        v.bytes[static_cast<std::size_t>((f * plane + p) * 3 + c)] = raw[static_cast<std::size_t>((f * 3 + c) * plane + p)];
  return v;
}

}  // namespace reuse_inr
