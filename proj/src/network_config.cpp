// SPDX-License-Identifier: Apache-2.0
#include "reuse_inr/network_config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace reuse_inr {

namespace {

constexpr const char* kNetworkFormat = "reuse-inr-network/1";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<Index>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(v[i]);
  }
  return out;
}

std::string grid_text(const GridDims& g) {
  return std::to_string(g.frames) + " " + std::to_string(g.rows) + " " + std::to_string(g.cols) + " " +
         std::to_string(g.channels);
}

GridDims parse_grid(const std::string& key, const std::string& value) {
  const auto v = parse_index_list(key, value);
  if (v.size() != 4) fail(ErrorKind::Config, key + ": expected 4 integers (frames rows cols channels)");
  return {v[0], v[1], v[2], v[3]};
}

}  // namespace

const char* to_string(ReuseMode mode) {
  switch (mode) {
    case ReuseMode::None: return "none";
    case ReuseMode::Deepen: return "deepen";
    case ReuseMode::Widen: return "widen";
  }
  return "none";
}

const char* to_string(ReuseGranularity g) {
  switch (g) {
    case ReuseGranularity::ConvLayer: return "conv_layer";
    case ReuseGranularity::ConvNeXtBlock: return "convnext_block";
    case ReuseGranularity::HiNeRVBlock: return "hinerv_block";
  }
  return "convnext_block";
}

ReuseMode parse_reuse_mode(const std::string& text) {
  if (text == "none") return ReuseMode::None;
  if (text == "deepen") return ReuseMode::Deepen;
  if (text == "widen") return ReuseMode::Widen;
  fail(ErrorKind::Config, "unknown reuse mode '" + text + "'");
}

ReuseGranularity parse_reuse_granularity(const std::string& text) {
  if (text == "conv_layer") return ReuseGranularity::ConvLayer;
  if (text == "convnext_block") return ReuseGranularity::ConvNeXtBlock;
  if (text == "hinerv_block") return ReuseGranularity::HiNeRVBlock;
  fail(ErrorKind::Config, "unknown reuse granularity '" + text + "'");
}

Index NetworkConfig::total_scale() const {
  Index s = 1;
  for (Index v : scales) s *= v;
  return s;
}

bool NetworkConfig::block_reuse_eligible(std::size_t n) const {
  if (reuse.mode == ReuseMode::Deepen && reuse.granularity == ReuseGranularity::HiNeRVBlock)
    return !block_has_transition(n);
  return residual_layers(n) > 0;
}

bool NetworkConfig::reuse_active(std::size_t n) const {
  return reuse.mode != ReuseMode::None && reuse.multiplier > 1 && n < reuse.location_mask.size() &&
         reuse.location_mask[n];
}

void NetworkConfig::validate() const {
  auto positive = [](Index v, const std::string& what) {
    if (v <= 0) fail(ErrorKind::Config, what + " must be positive, got " + std::to_string(v));
  };
  positive(frames, "frames");
  positive(height, "height");
  positive(width, "width");
  positive(patch_rows, "patch rows");
  positive(patch_cols, "patch cols");
  positive(stem_channels, "stem_channels");
  positive(base_grid.frames, "base_grid frames");
  positive(base_grid.rows, "base_grid rows");
  positive(base_grid.cols, "base_grid cols");
  positive(base_grid.channels, "base_grid channels");
  positive(kernel_size, "kernel");
  positive(head_kernel_size, "head_kernel");
  if (kernel_size % 2 == 0) fail(ErrorKind::Config, "kernel must be odd, got " + std::to_string(kernel_size));
  if (head_kernel_size % 2 == 0) fail(ErrorKind::Config, "head_kernel must be odd, got " + std::to_string(head_kernel_size));
  if (expansion_ratio < 1) fail(ErrorKind::Config, "expansion must be >= 1");

  const std::size_t n = depths.size();
  if (n == 0) fail(ErrorKind::Config, "at least one block is required");
  if (channels.size() != n || scales.size() != n || local_grids.size() != n)
    fail(ErrorKind::Config, "depths, channels, scales and local_grids must have the same length");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string b = "block " + std::to_string(i) + " ";
    positive(depths[i], b + "depth");
    positive(channels[i], b + "channels");
    positive(scales[i], b + "scale");
    positive(local_grids[i].frames, b + "grid frames");
    positive(local_grids[i].rows, b + "grid rows");
    positive(local_grids[i].cols, b + "grid cols");
    positive(local_grids[i].channels, b + "grid channels");
  }

  const Index s = total_scale();
  if (height % s != 0 || width % s != 0)
    fail(ErrorKind::Config, "frame " + std::to_string(height) + "x" + std::to_string(width) +
                                " is not divisible by the total upsampling factor " + std::to_string(s));
  if (base_rows() % patch_rows != 0 || base_cols() % patch_cols != 0)
    fail(ErrorKind::Config, "patch " + std::to_string(patch_rows) + "x" + std::to_string(patch_cols) +
                                " does not tile the base resolution " + std::to_string(base_rows()) + "x" +
                                std::to_string(base_cols()));

  if (reuse.multiplier < 1) fail(ErrorKind::Config, "reuse multiplier must be >= 1");
  if (reuse.location_mask.size() != n) fail(ErrorKind::Config, "reuse mask needs one flag per block");
  if (reuse.mode != ReuseMode::None) {
    for (std::size_t i = 0; i < n; ++i) {
      if (reuse.location_mask[i] && !block_reuse_eligible(i))
        fail(ErrorKind::Config, "block " + std::to_string(i) + " cannot reuse parameters: its input and output widths differ");
    }
  }
}

std::vector<Index> parse_index_list(const std::string& key, const std::string& value) {
  std::vector<Index> out;
  std::istringstream in(value);
  std::string tok;
  while (in >> tok) out.push_back(parse_index(key, tok));
  return out;
}

Index parse_index(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty())
    fail(ErrorKind::Config, key + ": '" + value + "' is not an integer");
  return static_cast<Index>(out);
}

double parse_double(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    fail(ErrorKind::Config, key + ": '" + value + "' is not a number");
  }
}

KeyValueDoc KeyValueDoc::parse(const std::string& text, const std::string& expected_format) {
  KeyValueDoc doc;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::Config, "line " + std::to_string(lineno) + ": empty key");
    if (!doc.entries_.emplace(key, value).second) fail(ErrorKind::Config, "duplicate key '" + key + "'");
  }
  const auto fmt = doc.entries_.find("format");
  if (fmt == doc.entries_.end()) fail(ErrorKind::Config, "missing 'format' key (expected " + expected_format + ")");
  if (fmt->second != expected_format)
    fail(ErrorKind::Config, "unsupported format '" + fmt->second + "' (expected " + expected_format + ")");
  doc.entries_.erase(fmt);
  return doc;
}

std::string KeyValueDoc::take(const std::string& key) {
  auto it = entries_.find(key);
  if (it == entries_.end()) fail(ErrorKind::Config, "missing key '" + key + "'");
  std::string v = it->second;
  entries_.erase(it);
  return v;
}

void KeyValueDoc::finish() const {
  if (!entries_.empty()) fail(ErrorKind::Config, "unknown key '" + entries_.begin()->first + "'");
}

std::string to_text(const NetworkConfig& c) {
  std::ostringstream out;
  out << "format = " << kNetworkFormat << "\n";
  out << "video = " << c.frames << " " << c.height << " " << c.width << "\n";
  out << "patch = " << c.patch_rows << " " << c.patch_cols << "\n";
  out << "base_grid = " << grid_text(c.base_grid) << "\n";
  out << "stem_channels = " << c.stem_channels << "\n";
  out << "depths = " << join(c.depths) << "\n";
  out << "channels = " << join(c.channels) << "\n";
  out << "scales = " << join(c.scales) << "\n";
  out << "local_grids =";
  for (std::size_t i = 0; i < c.local_grids.size(); ++i) out << (i ? " ; " : " ") << grid_text(c.local_grids[i]);
  out << "\n";
  out << "expansion = " << c.expansion_ratio << "\n";
  out << "kernel = " << c.kernel_size << "\n";
  out << "head_kernel = " << c.head_kernel_size << "\n";
  out << "reuse.mode = " << to_string(c.reuse.mode) << "\n";
  out << "reuse.granularity = " << to_string(c.reuse.granularity) << "\n";
  out << "reuse.multiplier = " << c.reuse.multiplier << "\n";
  out << "reuse.mask =";
  for (bool b : c.reuse.location_mask) out << ' ' << (b ? 1 : 0);
  out << "\n";
  return out.str();
}

NetworkConfig network_config_from_text(const std::string& text) {
  KeyValueDoc doc = KeyValueDoc::parse(text, kNetworkFormat);
  NetworkConfig c;
  const auto video = parse_index_list("video", doc.take("video"));
  if (video.size() != 3) fail(ErrorKind::Config, "video: expected 'frames height width'");
  c.frames = video[0];
  c.height = video[1];
  c.width = video[2];
  const auto patch = parse_index_list("patch", doc.take("patch"));
  if (patch.size() != 2) fail(ErrorKind::Config, "patch: expected 'rows cols'");
  c.patch_rows = patch[0];
  c.patch_cols = patch[1];
  c.base_grid = parse_grid("base_grid", doc.take("base_grid"));
  c.stem_channels = parse_index("stem_channels", doc.take("stem_channels"));
  c.depths = parse_index_list("depths", doc.take("depths"));
  c.channels = parse_index_list("channels", doc.take("channels"));
  c.scales = parse_index_list("scales", doc.take("scales"));
  {
    std::istringstream grids(doc.take("local_grids"));
    std::string item;
    while (std::getline(grids, item, ';')) c.local_grids.push_back(parse_grid("local_grids", item));
  }
  c.expansion_ratio = parse_index("expansion", doc.take("expansion"));
  c.kernel_size = parse_index("kernel", doc.take("kernel"));
  c.head_kernel_size = parse_index("head_kernel", doc.take("head_kernel"));
  c.reuse.mode = parse_reuse_mode(doc.take("reuse.mode"));
  c.reuse.granularity = parse_reuse_granularity(doc.take("reuse.granularity"));
  c.reuse.multiplier = static_cast<int>(parse_index("reuse.multiplier", doc.take("reuse.multiplier")));
  for (Index v : parse_index_list("reuse.mask", doc.take("reuse.mask"))) {
    if (v != 0 && v != 1) fail(ErrorKind::Config, "reuse.mask: flags must be 0 or 1");
    c.reuse.location_mask.push_back(v == 1);
  }
  doc.finish();
  c.validate();
  return c;
}

NetworkConfig default_network_config(Index frames, Index height, Index width) {
  NetworkConfig c;
  c.frames = frames;
  c.height = height;
  c.width = width;
  c.depths = {3, 3, 3, 1};
  c.scales = {2, 2, 2, 1};
  c.stem_channels = 16;
  c.channels = {16, 16, 16, 12};
  c.base_grid = {std::max<Index>(1, frames / 4), 4, 4, 8};
  c.local_grids = {GridDims{std::max<Index>(1, frames / 4), 4, 4, 2}, GridDims{std::max<Index>(1, frames / 4), 8, 8, 2},
                   GridDims{std::max<Index>(1, frames / 4), 8, 8, 2}, GridDims{std::max<Index>(1, frames / 4), 8, 8, 2}};
  c.expansion_ratio = 2;
  c.kernel_size = 3;
  c.head_kernel_size = 3;
  c.patch_rows = height / 8;
  c.patch_cols = width / 8;
  c.reuse.location_mask = {true, true, true, false};
  c.validate();
  return c;
}

NetworkConfig full_size_network_config() {
  // HiNeRV-shaped geometry: 120x120 output patches over a 9x16 base lattice,
  // widths shrinking by 1.2 per stage from 280, ConvNeXt expansion 4, kernel 7.
  NetworkConfig c;
  c.frames = 240;
  c.height = 1080;
  c.width = 1920;
  c.depths = {3, 3, 3, 1};
  c.scales = {5, 4, 3, 2};
  c.stem_channels = 280;
  c.channels = {280, 233, 194, 162};
  c.base_grid = {240, 9, 16, 16};
  c.local_grids = {GridDims{60, 45, 80, 4}, GridDims{60, 180, 320, 2}, GridDims{60, 540, 960, 2},
                   GridDims{60, 1080, 1920, 2}};
  c.expansion_ratio = 4;
  c.kernel_size = 7;
  c.head_kernel_size = 3;
  c.patch_rows = 1;
  c.patch_cols = 1;
  c.reuse.location_mask = {true, true, true, false};
  c.validate();
  return c;
}

}  // namespace reuse_inr
