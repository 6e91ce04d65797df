// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "reuse_inr/training.hpp"

namespace reuse_inr {

/// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_bytes(const std::vector<std::uint8_t>& bytes);

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
void write_binary_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

NetworkConfig load_network_config(const std::filesystem::path& path);
TrainConfig load_train_config(const std::filesystem::path& path);

/// One manifest line: what ran, on what, and what it produced.
struct RunRecord {
  std::string command;
  std::string config_path;
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  double wall_clock_s = 0.0;
  /// Extra command-specific fields, as a JSON object text.
  std::string extra_json = "{}";
};

/// Appends `record` to `<dir>/manifest.jsonl`, digesting every input and output.
void append_manifest(const std::filesystem::path& dir, const RunRecord& record);

struct EncodeOutcome {
  std::vector<std::uint8_t> bitstream;
  VideoBuffer reconstruction;  // decoder-side frames computed by the encoder
  double psnr = 0.0;            // of the 8-bit frames the decoder writes
  double bpp = 0.0;
  std::vector<EpochLog> log;
};

/// fit (with its QAT stage), pack, and reconstruct from the quantized weights.
EncodeOutcome encode_video(const NetworkConfig& net, const TrainConfig& train, const VideoBuffer& video,
                           std::uint64_t seed);

/// Bitstream -> frames.
VideoBuffer decode_bitstream(const std::vector<std::uint8_t>& bytes);

/// Standard four-sequence synthetic corpus, one of each kind.
std::vector<std::pair<std::string, VideoBuffer>> synth_corpus(Index frames, Index height, Index width,
                                                              std::uint64_t seed);

enum class AblationSuite { Location, Times, Granularity };
AblationSuite parse_ablation_suite(const std::string& text);
const char* to_string(AblationSuite suite);

struct AblationCell {
  std::string name;
  NetworkConfig config;
};

/// Configuration grid of a suite built around `base`. Location cells reuse the
/// shallowest, middle and deepest eligible block in turn; times sweeps m over 1..4;
/// granularity sweeps the three reuse granularities.
std::vector<AblationCell> ablation_cells(AblationSuite suite, const NetworkConfig& base);

struct AblationRow {
  std::string cell;
  std::string sequence;
  double bpp = 0.0;
  double psnr = 0.0;
  std::uint64_t macs = 0;
};

/// Maximum parallel grid cells from REUSE_INR_THREADS (default 1).
int max_parallel_cells();

/// CLI entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace reuse_inr
