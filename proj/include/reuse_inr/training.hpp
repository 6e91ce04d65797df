// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "reuse_inr/network.hpp"
#include "reuse_inr/param_codec.hpp"
#include "reuse_inr/video.hpp"

namespace reuse_inr {

/// Optimisation schedule. The learning rate ramps linearly over `warmup_epochs`
/// and then follows a cosine down to `min_lr` at the end of the full-precision
/// stage. The quantization-aware stage follows with its own cosine starting at
/// `qat_lr_scale * lr`.
struct TrainConfig {
  Index epochs = 300;
  Index warmup_epochs = 30;
  Index qat_epochs = 30;
  Index batch_patches = 1;
  double lr = 5e-4;
  double min_lr = 0.0;
  double qat_lr_scale = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int quant_bits = kDefaultQuantBits;

  void validate() const;
  /// Epoch counts multiplied by `factor`, each at least 1 (warmup and QAT may stay 0).
  TrainConfig scaled(double factor) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::string to_text(const TrainConfig& config);
TrainConfig train_config_from_text(const std::string& text);

/// Learning rate at a fractional epoch of the full-precision stage.
double lr_at(const TrainConfig& config, double epoch);
/// Learning rate at a fractional epoch of the quantization-aware stage.
double qat_lr_at(const TrainConfig& config, double qat_epoch);

/// First and second moment estimates for every parameter tensor.
struct AdamState {
  std::vector<Eigen::ArrayXf> m;
  std::vector<Eigen::ArrayXf> v;
  Index step = 0;
};

/// One bias-corrected Adam update from the gradients currently held by `params`.
void adam_step(ParameterStore<float>& params, AdamState& state, double lr, const TrainConfig& config);

/// Parameters with uniform noise in [-delta/2, delta/2) added per tensor, where delta
/// is the quantization step of that tensor. Gradients flow straight through.
ParameterStore<float> with_quant_noise(Tape<float>& tape, const ParameterStore<float>& params, int bits,
                                       std::mt19937_64& rng);

enum class TrainStage { FullPrecision, QuantAware };
const char* to_string(TrainStage stage);

struct EpochLog {
  Index epoch = 0;
  TrainStage stage = TrainStage::FullPrecision;
  double loss = 0.0;
  double psnr = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ParameterStore<float> params;
  std::vector<EpochLog> log;
};

/// Fits a network to `video`. Identical inputs and seed give bit-identical parameters.
TrainResult fit(const NetworkConfig& net, const TrainConfig& train, const VideoBuffer& video, std::uint64_t seed,
                const std::function<void(const EpochLog&)>& on_epoch = {});

/// Decodes every frame. Output is clamped to [0, 1].
VideoBuffer render_video(const NetworkConfig& net, const ParameterStore<float>& params);

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace reuse_inr
