// SPDX-License-Identifier: Apache-2.0
#include "reuse_inr/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace reuse_inr {

namespace {

constexpr const char* kTrainFormat = "reuse-inr-train/1";

Index scale_count(Index n, double factor, Index floor) {
  if (n == 0) return 0;
  return std::max<Index>(floor, static_cast<Index>(std::llround(static_cast<double>(n) * factor)));
}

/// Target pixels covered by an output patch.
Tensor<float> patch_target(const NetworkConfig& net, const VideoBuffer& video, PatchCoord c) {
  const Index ph = net.output_patch_rows(), pw = net.output_patch_cols();
  Tensor<float> t(Shape{ph, pw, 3});
  for (Index r = 0; r < ph; ++r)
    for (Index k = 0; k < pw * 3; ++k) {
      const Index y = c.row * ph + r;
      const Index idx = ((c.frame * video.height + y) * video.width + c.col * pw) * 3 + k;
      t.values()[r * pw * 3 + k] = video.unit(idx);
    }
  return t;
}

/// Shortest decimal text that reads back to the same double.
std::string number_text(double v) {
  for (int digits = 1; digits <= 17; ++digits) {
    std::ostringstream out;
    out.precision(digits);
    out << v;
    if (std::stod(out.str()) == v) return out.str();
  }
  return std::to_string(v);
}

}  // namespace

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::Config, "train config: " + what);
  };
  need(epochs >= 1, "epochs must be >= 1");
  need(warmup_epochs >= 0 && warmup_epochs <= epochs, "warmup_epochs must be in [0, epochs]");
  need(qat_epochs >= 0, "qat_epochs must be >= 0");
  need(batch_patches >= 1, "batch_patches must be >= 1");
  need(lr > 0.0 && min_lr >= 0.0 && min_lr <= lr, "need 0 <= min_lr <= lr and lr > 0");
  need(qat_lr_scale > 0.0, "qat_lr_scale must be positive");
  need(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must be in [0, 1)");
  need(eps > 0.0, "eps must be positive");
  need(quant_bits >= 2 && quant_bits <= 8, "quant_bits must be in [2, 8]");
}

TrainConfig TrainConfig::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) fail(ErrorKind::Usage, "epoch scale must be a positive number");
  TrainConfig c = *this;
  c.epochs = scale_count(epochs, factor, 1);
  c.warmup_epochs = std::min(c.epochs, scale_count(warmup_epochs, factor, 0));
  c.qat_epochs = scale_count(qat_epochs, factor, 1);
  return c;
}

std::string to_text(const TrainConfig& c) {
  std::ostringstream out;
  out << "format = " << kTrainFormat << "\n"
      << "epochs = " << c.epochs << "\nwarmup_epochs = " << c.warmup_epochs << "\nqat_epochs = " << c.qat_epochs
      << "\nbatch_patches = " << c.batch_patches << "\nlr = " << number_text(c.lr)
      << "\nmin_lr = " << number_text(c.min_lr) << "\nqat_lr_scale = " << number_text(c.qat_lr_scale)
      << "\nbeta1 = " << number_text(c.beta1) << "\nbeta2 = " << number_text(c.beta2)
      << "\neps = " << number_text(c.eps) << "\nquant_bits = " << c.quant_bits << "\n";
  return out.str();
}

TrainConfig train_config_from_text(const std::string& text) {
  auto doc = KeyValueDoc::parse(text, kTrainFormat);
  TrainConfig c;
  auto opt_index = [&](const char* key, Index& v) {
    if (doc.has(key)) v = parse_index(key, doc.take(key));
  };
  auto opt_double = [&](const char* key, double& v) {
    if (doc.has(key)) v = parse_double(key, doc.take(key));
  };
  opt_index("epochs", c.epochs);
  opt_index("warmup_epochs", c.warmup_epochs);
  opt_index("qat_epochs", c.qat_epochs);
  opt_index("batch_patches", c.batch_patches);
  opt_double("lr", c.lr);
  opt_double("min_lr", c.min_lr);
  opt_double("qat_lr_scale", c.qat_lr_scale);
  opt_double("beta1", c.beta1);
  opt_double("beta2", c.beta2);
  opt_double("eps", c.eps);
  Index bits = c.quant_bits;
  opt_index("quant_bits", bits);
  c.quant_bits = static_cast<int>(bits);
  doc.finish();
  c.validate();
  return c;
}

double lr_at(const TrainConfig& c, double epoch) {
  const double e = std::clamp(epoch, 0.0, static_cast<double>(c.epochs));
  const double w = static_cast<double>(c.warmup_epochs);
  if (e < w) return c.lr * e / w;
  const double span = static_cast<double>(c.epochs) - w;
  const double progress = span > 0.0 ? (e - w) / span : 1.0;
  return c.min_lr + 0.5 * (c.lr - c.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

double qat_lr_at(const TrainConfig& c, double qat_epoch) {
  const double top = c.lr * c.qat_lr_scale;
  const double bottom = std::min(c.min_lr, top);
  const double progress = c.qat_epochs > 0 ? std::clamp(qat_epoch / static_cast<double>(c.qat_epochs), 0.0, 1.0) : 1.0;
  return bottom + 0.5 * (top - bottom) * (1.0 + std::cos(std::numbers::pi * progress));
}

void adam_step(ParameterStore<float>& params, AdamState& s, double lr, const TrainConfig& c) {
  if (s.m.empty()) {
    for (const auto& [name, t] : params) {
      s.m.push_back(Eigen::ArrayXf::Zero(t.size()));
      s.v.push_back(Eigen::ArrayXf::Zero(t.size()));
    }
  }
  if (s.m.size() != params.size()) fail(ErrorKind::Dimension, "optimizer state does not match the parameter set");
  ++s.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  const float b1 = static_cast<float>(c.beta1), b2 = static_cast<float>(c.beta2);
  const float step = static_cast<float>(lr / bc1);
  const float root_bc2 = static_cast<float>(std::sqrt(bc2));
  const float eps = static_cast<float>(c.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& t = params[i].second;
    if (!t.has_grad()) continue;
    const auto& g = t.grad();
    s.m[i] = b1 * s.m[i] + (1.0f - b1) * g;
    s.v[i] = b2 * s.v[i] + (1.0f - b2) * g.square();
    t.values() -= step * s.m[i] / (s.v[i].sqrt() / root_bc2 + eps);
  }
}

ParameterStore<float> with_quant_noise(Tape<float>& tape, const ParameterStore<float>& params, int bits,
                                       std::mt19937_64& rng) {
  ParameterStore<float> out;
  for (const auto& [name, t] : params) {
    const float delta = quant_step(t.values(), bits);
    Eigen::ArrayXf noise(t.size());
    for (Index i = 0; i < t.size(); ++i)
      noise[i] = static_cast<float>((detail::unit_uniform(rng) - 0.5) * static_cast<double>(delta));
    out.add(name, add_constant(tape, t, noise));
  }
  return out;
}

const char* to_string(TrainStage stage) { return stage == TrainStage::FullPrecision ? "fp" : "qat"; }

TrainResult fit(const NetworkConfig& net, const TrainConfig& train, const VideoBuffer& video, std::uint64_t seed,
                const std::function<void(const EpochLog&)>& on_epoch) {
  net.validate();
  train.validate();
  if (video.frames != net.frames || video.height != net.height || video.width != net.width)
    fail(ErrorKind::Dimension, "video is " + std::to_string(video.frames) + "x" + std::to_string(video.height) + "x" +
                                   std::to_string(video.width) + ", the network decodes " + std::to_string(net.frames) +
                                   "x" + std::to_string(net.height) + "x" + std::to_string(net.width));

  TrainResult result;
  result.params = init_parameters<float>(net, seed);
  result.params.set_requires_grad(true);
  std::mt19937_64 order_rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::mt19937_64 noise_rng(seed ^ 0xd1b54a32d192ed03ull);

  std::vector<PatchCoord> patches;
  std::vector<Tensor<float>> targets;
  for (Index t = 0; t < net.frames; ++t)
    for (Index i = 0; i < net.patch_grid_rows(); ++i)
      for (Index j = 0; j < net.patch_grid_cols(); ++j) {
        patches.push_back({i, j, t});
        targets.push_back(patch_target(net, video, patches.back()));
      }
  std::vector<std::size_t> order(patches.size());
  const double steps_per_epoch =
      std::ceil(static_cast<double>(patches.size()) / static_cast<double>(train.batch_patches));

  AdamState adam;
  const Index total = train.epochs + train.qat_epochs;
  for (Index epoch = 0; epoch < total; ++epoch) {
    const TrainStage stage = epoch < train.epochs ? TrainStage::FullPrecision : TrainStage::QuantAware;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), order_rng);

    double loss_sum = 0.0;
    double lr = 0.0;
    Index step = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(train.batch_patches), ++step) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(train.batch_patches));
      result.params.zero_grad();
      for (std::size_t k = start; k < stop; ++k) {
        Tape<float> tape;
        const ParameterStore<float> used = stage == TrainStage::QuantAware
                                               ? with_quant_noise(tape, result.params, train.quant_bits, noise_rng)
                                               : result.params;
        const auto p = NetworkParams<float>::from(net, used);
        const Tensor<float> y = forward_patch(tape, net, p, patches[order[k]]);
        Tensor<float> loss = mse_loss(tape, y, targets[order[k]]);
        const double l = loss.item();
        if (!std::isfinite(l)) fail(ErrorKind::Data, "training diverged at epoch " + std::to_string(epoch));
        loss_sum += l;
        tape.backward(loss);
      }
      if (stop - start > 1)
        for (auto& [name, t] : result.params)
          if (t.has_grad()) t.grad_buffer() /= static_cast<float>(stop - start);
      const double at = static_cast<double>(epoch) + static_cast<double>(step + 1) / steps_per_epoch;
      lr = stage == TrainStage::FullPrecision ? lr_at(train, at) : qat_lr_at(train, at - static_cast<double>(train.epochs));
      adam_step(result.params, adam, lr, train);
    }
    EpochLog e{epoch, stage, loss_sum / static_cast<double>(order.size()), 0.0, lr};
    e.psnr = psnr_from_mse(e.loss);
    result.log.push_back(e);
    if (on_epoch) on_epoch(e);
  }
  result.params.set_requires_grad(false);
  result.params.zero_grad();
  return result;
}

VideoBuffer render_video(const NetworkConfig& net, const ParameterStore<float>& params) {
  net.validate();
  const ParameterStore<float> frozen = params.clone(false);
  const auto p = NetworkParams<float>::from(net, frozen);
  VideoBuffer out = VideoBuffer::floats(net.frames, net.height, net.width);
  for (Index t = 0; t < net.frames; ++t) {
    Tape<float> tape(false);
    out.set_frame(t, forward_frame(tape, net, p, t));
  }
  out.clamp();
  return out;
}

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.precision(10);
  out << "epoch,stage,loss,psnr,lr\n";
  for (const auto& e : log) out << e.epoch << ',' << to_string(e.stage) << ',' << e.loss << ',' << e.psnr << ',' << e.lr << '\n';
  if (!out) fail(ErrorKind::Io, "write failed for " + path.string());
}

}  // namespace reuse_inr
