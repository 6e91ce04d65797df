// SPDX-License-Identifier: Apache-2.0
#include "reuse_inr/param_codec.hpp"

#include <algorithm>
#include <cstring>

namespace reuse_inr {

namespace {

constexpr char kMagic[4] = {'I', 'N', 'R', 'C'};
constexpr const char* kBitsKey = "codec.quant_bits = ";

void check_bits(int bits) {
  if (bits < 2 || bits > 8) fail(ErrorKind::Config, "quantization bits must be in [2, 8], got " + std::to_string(bits));
}

class Writer {
public:
  template <typename T>
  void put(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
  }
  void put_f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put(u);
  }
  void put_bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
public:
  explicit Reader(const std::vector<std::uint8_t>& in) : in_(in) {}
  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }
  float get_f32(const char* what) {
    const auto u = get<std::uint32_t>(what);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
  const std::uint8_t* take(std::size_t n, const char* what) {
    need(n, what);
    const std::uint8_t* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) fail(ErrorKind::Corruption, std::string("bitstream truncated while reading ") + what);
  }
  const std::vector<std::uint8_t>& in_;
  std::size_t pos_ = 0;
};

}  // namespace

float quant_step(const Eigen::ArrayXf& values, int bits) {
  check_bits(bits);
  if (values.size() == 0) return 0.0f;
  if (!values.isFinite().all()) fail(ErrorKind::Data, "cannot quantize a tensor with NaN or Inf values");
  return values.abs().maxCoeff() / static_cast<float>(QuantizedTensor::center(bits));
}

QuantizedTensor quantize_values(const Eigen::ArrayXf& values, const Shape& shape, int bits) {
  QuantizedTensor q;
  q.shape = shape;
  q.bits = bits;
  q.delta = quant_step(values, bits);
  const auto c = static_cast<double>(QuantizedTensor::center(bits));
  const auto top = static_cast<double>(QuantizedTensor::max_symbol(bits));
  q.symbols.resize(static_cast<std::size_t>(values.size()));
  for (Index i = 0; i < values.size(); ++i) {
    double s = c;
    if (q.delta > 0.0f) s = std::clamp(std::round(static_cast<double>(values[i]) / q.delta) + c, 0.0, top);
    q.symbols[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(s);
  }
  return q;
}

Eigen::ArrayXf dequantize_values(const QuantizedTensor& q) {
  Eigen::ArrayXf out(static_cast<Index>(q.symbols.size()));
  const auto c = static_cast<double>(QuantizedTensor::center(q.bits));
  for (std::size_t i = 0; i < q.symbols.size(); ++i)
    out[static_cast<Index>(i)] = static_cast<float>((static_cast<double>(q.symbols[i]) - c) * static_cast<double>(q.delta));
  return out;
}

ParameterStore<float> quantize_parameters(const ParameterStore<float>& params, int bits) {
  ParameterStore<float> out;
  for (const auto& [name, t] : params) out.add(name, dequantize_tensor(quantize_tensor(t, bits)));
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& s) {
  Writer w;
  w.put_bytes(kMagic, 4);
  w.put(kBitstreamVersion);
  w.put(static_cast<std::uint32_t>(s.config_text.size()));
  w.put_bytes(s.config_text.data(), s.config_text.size());
  if (s.records.size() > 0xFFFF) fail(ErrorKind::Config, "too many tensors for the bitstream format");
  w.put(static_cast<std::uint16_t>(s.records.size()));
  for (const auto& r : s.records) {
    w.put(r.name_hash);
    w.put(static_cast<std::uint8_t>(r.tensor.shape.size()));
    for (Index d : r.tensor.shape) w.put(static_cast<std::uint32_t>(d));
    w.put_f32(r.tensor.delta);
    w.put(static_cast<std::uint64_t>(r.tensor.symbols.size()));
  }
  w.put(s.payload.bits);
  w.put_bytes(s.payload.bytes.data(), s.payload.bytes.size());
  return w.out;
}

Bitstream parse_bitstream(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) fail(ErrorKind::Format, "not an INRC bitstream (bad magic)");
  Reader r(bytes);
  r.take(4, "magic");
  const auto version = r.get<std::uint8_t>("version");
  if (version != kBitstreamVersion)
    fail(ErrorKind::Format, "unsupported bitstream version " + std::to_string(version));
  Bitstream s;
  const auto cfg_len = r.get<std::uint32_t>("config length");
  const auto* cfg = r.take(cfg_len, "config block");
  s.config_text.assign(reinterpret_cast<const char*>(cfg), cfg_len);
  const auto count = r.get<std::uint16_t>("tensor count");
  for (std::uint16_t i = 0; i < count; ++i) {
    TensorRecord rec;
    rec.name_hash = r.get<std::uint64_t>("name hash");
    const auto rank = r.get<std::uint8_t>("rank");
    for (std::uint8_t k = 0; k < rank; ++k) rec.tensor.shape.push_back(r.get<std::uint32_t>("dims"));
    rec.tensor.delta = r.get_f32("scale");
    const auto n = r.get<std::uint64_t>("symbol count");
    if (n != static_cast<std::uint64_t>(numel(rec.tensor.shape)))
      fail(ErrorKind::Corruption, "tensor record " + std::to_string(i) + ": symbol count does not match its shape");
    rec.tensor.symbols.resize(n);
    s.records.push_back(std::move(rec));
  }
  s.payload.bits = r.get<std::uint64_t>("payload length");
  const std::uint64_t nbytes = (s.payload.bits + 7) / 8;
  if (r.remaining() < nbytes) fail(ErrorKind::Corruption, "bitstream truncated inside the symbol payload");
  const auto* p = r.take(nbytes, "payload");
  s.payload.bytes.assign(p, p + nbytes);
  if (r.remaining() != 0) fail(ErrorKind::Corruption, "trailing bytes after the symbol payload");
  return s;
}

std::vector<std::uint8_t> pack_model(const ParameterStore<float>& params, const NetworkConfig& config, int bits) {
  check_bits(bits);
  config.validate();
  Bitstream s;
  s.config_text = to_text(config) + kBitsKey + std::to_string(bits) + "\n";
  std::vector<std::uint32_t> symbols;
  for (const auto& [name, t] : params) {
    TensorRecord rec{fnv1a64(name), quantize_tensor(t, bits)};
    symbols.insert(symbols.end(), rec.tensor.symbols.begin(), rec.tensor.symbols.end());
    rec.tensor.symbols.clear();
    s.records.push_back(std::move(rec));
  }
  s.payload = encode_stream(symbols, bits);
  // the symbol counts come from the shapes, so the records only need their lengths
  for (auto& rec : s.records) rec.tensor.symbols.resize(static_cast<std::size_t>(numel(rec.tensor.shape)));
  return serialize_bitstream(s);
}

DecodedModel unpack_model(const std::vector<std::uint8_t>& bytes) {
  Bitstream s = parse_bitstream(bytes);
  DecodedModel out;

  const auto key = s.config_text.rfind(kBitsKey);
  if (key == std::string::npos) fail(ErrorKind::Format, "config block lacks the quantization width");
  std::string bits_text = s.config_text.substr(key + std::strlen(kBitsKey));
  if (!bits_text.empty() && bits_text.back() == '\n') bits_text.pop_back();
  out.bits = static_cast<int>(parse_index("codec.quant_bits", bits_text));
  check_bits(out.bits);
  out.config = network_config_from_text(s.config_text.substr(0, key));

  const auto layout = init_parameters<float>(out.config, 0);
  if (layout.size() != s.records.size())
    fail(ErrorKind::Corruption, "bitstream holds " + std::to_string(s.records.size()) + " tensors, the config needs " +
                                    std::to_string(layout.size()));
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, t] = layout[i];
    const auto& rec = s.records[i];
    if (rec.name_hash != fnv1a64(name)) fail(ErrorKind::Corruption, "tensor record " + std::to_string(i) + " does not match '" + name + "'");
    if (rec.tensor.shape != t.shape())
      fail(ErrorKind::Corruption, "tensor '" + name + "' has shape " + shape_string(rec.tensor.shape) + ", expected " +
                                      shape_string(t.shape()));
    if (!std::isfinite(rec.tensor.delta) || rec.tensor.delta < 0.0f) fail(ErrorKind::Corruption, "tensor '" + name + "' has an invalid scale");
    total += rec.tensor.symbols.size();
  }

  const auto symbols = decode_stream(s.payload, total, out.bits);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    QuantizedTensor q = s.records[i].tensor;
    q.bits = out.bits;
    std::copy(symbols.begin() + static_cast<std::ptrdiff_t>(pos),
              symbols.begin() + static_cast<std::ptrdiff_t>(pos + q.symbols.size()), q.symbols.begin());
    pos += q.symbols.size();
    out.params.add(layout[i].first, dequantize_tensor(q));
    out.tensors.push_back(std::move(q));
  }
  return out;
}

}  // namespace reuse_inr
