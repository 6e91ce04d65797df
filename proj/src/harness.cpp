// SPDX-License-Identifier: Apache-2.0
#include "reuse_inr/harness.hpp"

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

namespace reuse_inr {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string hex(const unsigned char* p, unsigned n) {
  std::ostringstream out;
  for (unsigned i = 0; i < n; ++i) out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(p[i]);
  return out.str();
}

class Sha256 {
public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) fail(ErrorKind::Io, "SHA-256 unavailable");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;
  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx_, p, n); }
  std::string finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned n = 0;
    EVP_DigestFinal_ex(ctx_, md, &n);
    return hex(md, n);
  }

private:
  EVP_MD_CTX* ctx_;
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void check_video_matches(const NetworkConfig& net, const VideoBuffer& v, const std::string& what) {
  if (v.frames != net.frames || v.height != net.height || v.width != net.width)
    fail(ErrorKind::Config, what + " is " + std::to_string(v.frames) + "x" + std::to_string(v.height) + "x" +
                                std::to_string(v.width) + " but the network config describes " +
                                std::to_string(net.frames) + "x" + std::to_string(net.height) + "x" +
                                std::to_string(net.width));
}

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

std::vector<std::size_t> eligible_blocks(const NetworkConfig& c) {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < c.num_blocks(); ++n)
    if (c.block_reuse_eligible(n)) out.push_back(n);
  return out;
}

/// Runs `work(i)` for i in [0, n) on up to `threads` workers; the first error is rethrown.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& work) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= n) return;
      try {
        work(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!first) first = std::current_exception();
        next = n;
      }
    }
  };
  const int k = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (k == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < k; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.finish();
}

std::string sha256_bytes(const std::vector<std::uint8_t>& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.finish();
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::uint8_t> read_binary_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
}

NetworkConfig load_network_config(const fs::path& path) { return network_config_from_text(read_text_file(path)); }
TrainConfig load_train_config(const fs::path& path) { return train_config_from_text(read_text_file(path)); }

void append_manifest(const fs::path& dir, const RunRecord& r) {
  auto files = [](const std::vector<fs::path>& paths) {
    json out = json::array();
    for (const auto& p : paths) out.push_back({{"path", p.string()}, {"sha256", sha256_file(p)}});
    return out;
  };
  json line = {{"command", r.command},     {"config", r.config_path},         {"seed", r.seed},
               {"inputs", files(r.inputs)}, {"outputs", files(r.outputs)},     {"wall_clock_s", r.wall_clock_s},
               {"finished_utc", utc_now()}, {"extra", json::parse(r.extra_json)}};
  std::ofstream out(dir / "manifest.jsonl", std::ios::app);
  out << line.dump() << '\n';
  if (!out) fail(ErrorKind::Io, "cannot append to " + (dir / "manifest.jsonl").string());
}

EncodeOutcome encode_video(const NetworkConfig& net, const TrainConfig& train, const VideoBuffer& video,
                           std::uint64_t seed) {
  check_video_matches(net, video, "input video");
  EncodeOutcome out;
  TrainResult fitted = fit(net, train, video, seed);
  out.log = std::move(fitted.log);
  out.bitstream = pack_model(fitted.params, net, train.quant_bits);
  out.reconstruction = render_video(net, quantize_parameters(fitted.params, train.quant_bits));
  out.psnr = psnr(out.reconstruction.to_rgb8(), video);
  out.bpp = bpp(out.bitstream.size(), video.frames, video.height, video.width);
  return out;
}

VideoBuffer decode_bitstream(const std::vector<std::uint8_t>& bytes) {
  const DecodedModel m = unpack_model(bytes);
  return render_video(m.config, m.params);
}

std::vector<std::pair<std::string, VideoBuffer>> synth_corpus(Index frames, Index height, Index width,
                                                              std::uint64_t seed) {
  std::vector<std::pair<std::string, VideoBuffer>> out;
  for (auto k : all_synth_kinds()) out.emplace_back(to_string(k), synth_video(k, frames, height, width, seed));
  return out;
}

AblationSuite parse_ablation_suite(const std::string& text) {
  if (text == "location") return AblationSuite::Location;
  if (text == "times") return AblationSuite::Times;
  if (text == "granularity") return AblationSuite::Granularity;
  fail(ErrorKind::Usage, "unknown ablation suite '" + text + "' (location, times, granularity)");
}

const char* to_string(AblationSuite suite) {
  switch (suite) {
    case AblationSuite::Location: return "location";
    case AblationSuite::Times: return "times";
    case AblationSuite::Granularity: return "granularity";
  }
  return "?";
}

std::vector<AblationCell> ablation_cells(AblationSuite suite, const NetworkConfig& base) {
  NetworkConfig b = base;
  b.reuse.mode = ReuseMode::Deepen;
  if (b.reuse.multiplier < 2) b.reuse.multiplier = 2;
  std::vector<AblationCell> cells;
  switch (suite) {
    case AblationSuite::Location: {
      const auto eligible = eligible_blocks(b);
      if (eligible.size() < 3) fail(ErrorKind::Config, "location suite needs at least three reuse-eligible blocks");
      const std::pair<const char*, std::size_t> picks[] = {
          {"shallow", eligible.front()}, {"medium", eligible[eligible.size() / 2]}, {"deep", eligible.back()}};
      for (const auto& [name, block] : picks) {
        NetworkConfig c = b;
        c.reuse.location_mask.assign(c.num_blocks(), false);
        c.reuse.location_mask[block] = true;
        cells.push_back({name, c});
      }
      break;
    }
    case AblationSuite::Times:
      for (int m = 1; m <= 4; ++m) {
        NetworkConfig c = b;
        c.reuse.multiplier = m;
        cells.push_back({"m" + std::to_string(m), c});
      }
      break;
    case AblationSuite::Granularity:
      for (auto g : {ReuseGranularity::ConvLayer, ReuseGranularity::ConvNeXtBlock, ReuseGranularity::HiNeRVBlock}) {
        NetworkConfig c = b;
        c.reuse.granularity = g;
        for (std::size_t n = 0; n < c.num_blocks(); ++n)
          if (c.reuse.location_mask[n] && !c.block_reuse_eligible(n)) c.reuse.location_mask[n] = false;
        cells.push_back({to_string(g), c});
      }
      break;
  }
  for (auto& c : cells) c.config.validate();
  return cells;
}

int max_parallel_cells() {
  const char* v = std::getenv("REUSE_INR_THREADS");
  if (!v || !*v) return 1;
  try {
    const Index n = parse_index("REUSE_INR_THREADS", v);
    if (n < 1) fail(ErrorKind::Usage, "REUSE_INR_THREADS must be >= 1");
    return static_cast<int>(n);
  } catch (const Error& e) {
    fail(ErrorKind::Usage, e.what());
  }
}

namespace {

struct CommonOptions {
  std::string config;
  std::string train;
  std::uint64_t seed = 0;
  std::string out;
  double scale_epochs = 1.0;
};

TrainConfig train_from(const CommonOptions& o) {
  TrainConfig t = o.train.empty() ? TrainConfig{} : load_train_config(o.train);
  return o.scale_epochs == 1.0 ? t : t.scaled(o.scale_epochs);
}

fs::path out_dir(const CommonOptions& o, const char* command) {
  const fs::path dir = o.out.empty() ? fs::path("runs") / command : fs::path(o.out);
  ensure_dir(dir);
  return dir;
}

int cmd_synth(const CommonOptions& o, const std::string& kind, Index frames, Index height, Index width) {
  const auto t0 = std::chrono::steady_clock::now();
  const SynthKind k = parse_synth_kind(kind);
  const fs::path dir = out_dir(o, "synth");
  const fs::path path = dir / (kind + ".rgb");
  save_raw(path, synth_video(k, frames, height, width, o.seed));
  append_manifest(dir, {"synth", "", o.seed, {}, {path, sidecar_path(path)}, seconds_since(t0),
                        json{{"kind", kind}, {"frames", frames}, {"height", height}, {"width", width}}.dump()});
  std::cout << path.string() << "  sha256 " << sha256_file(path) << "\n";
  return 0;
}

int cmd_encode(const CommonOptions& o, const std::string& input) {
  const auto t0 = std::chrono::steady_clock::now();
  if (o.config.empty()) fail(ErrorKind::Usage, "encode needs --config");
  const NetworkConfig net = load_network_config(o.config);
  const TrainConfig train = train_from(o);
  const VideoBuffer video = load_raw(input);
  check_video_matches(net, video, input);
  const fs::path dir = out_dir(o, "encode");
  const EncodeOutcome e = encode_video(net, train, video, o.seed);
  const fs::path stream = dir / "model.inrc", log = dir / "train_log.csv", recon = dir / "encoder_recon.rgb";
  write_binary_file(stream, e.bitstream);
  write_train_log(log, e.log);
  save_raw(recon, e.reconstruction);
  std::vector<fs::path> inputs{input, sidecar_path(input), o.config};
  if (!o.train.empty()) inputs.push_back(o.train);
  append_manifest(dir, {"encode", o.config, o.seed, inputs, {stream, log, recon, sidecar_path(recon)},
                        seconds_since(t0),
                        json{{"bytes", e.bitstream.size()}, {"bpp", e.bpp}, {"psnr", e.psnr},
                             {"epochs", train.epochs}, {"qat_epochs", train.qat_epochs}}
                            .dump()});
  std::cout << "bitstream " << stream.string() << " (" << e.bitstream.size() << " bytes)\n"
            << "bpp " << fixed(e.bpp, 4) << "\n"
            << "psnr " << fixed(e.psnr, 3) << " dB (encoder-side, quantized weights)\n";
  return 0;
}

int cmd_decode(const CommonOptions& o, const std::string& input) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto bytes = read_binary_file(input);
  const VideoBuffer v = decode_bitstream(bytes);
  const double decode_s = seconds_since(t0);
  const fs::path dir = out_dir(o, "decode");
  const fs::path path = dir / "decoded.rgb";
  save_raw(path, v);
  append_manifest(dir, {"decode", "", o.seed, {input}, {path, sidecar_path(path)}, seconds_since(t0),
                        json{{"decode_runtime_s", decode_s}, {"frames", v.frames}}.dump()});
  std::cout << "decoded " << v.frames << " frames to " << path.string() << " in " << fixed(decode_s, 3) << " s\n";
  return 0;
}

int cmd_eval(const CommonOptions& o, const std::string& reference, const std::string& bitstream,
             const std::string& decoded, const std::string& label) {
  const auto t0 = std::chrono::steady_clock::now();
  const VideoBuffer ref = load_raw(reference);
  if (bitstream.empty() == decoded.empty()) fail(ErrorKind::Usage, "eval needs exactly one of --bitstream or --decoded");
  std::vector<fs::path> inputs{reference, sidecar_path(reference)};
  RDPoint p{label, 0.0, 0.0};
  if (!bitstream.empty()) {
    const auto bytes = read_binary_file(bitstream);
    p.psnr = psnr(ref, decode_bitstream(bytes).to_rgb8());
    p.bpp = bpp(bytes.size(), ref.frames, ref.height, ref.width);
    inputs.push_back(bitstream);
  } else {
    p.psnr = psnr(ref, load_raw(decoded));
    inputs.push_back(decoded);
  }
  const fs::path dir = out_dir(o, "eval");
  const fs::path csv = dir / "rd.csv";
  std::vector<RDPoint> points = fs::exists(csv) ? read_rd_csv(csv) : std::vector<RDPoint>{};
  points.push_back(p);
  write_rd_csv(csv, points);
  append_manifest(dir, {"eval", "", o.seed, inputs, {csv}, seconds_since(t0),
                        json{{"label", label}, {"bpp", p.bpp}, {"psnr", p.psnr}}.dump()});
  std::cout << label << ": bpp " << fixed(p.bpp, 4) << "  psnr " << fixed(p.psnr, 3) << " dB\n";
  return 0;
}

int cmd_bdrate(const CommonOptions& o, const std::string& anchor, const std::string& test) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = bd_rate(read_rd_csv(anchor), read_rd_csv(test));
  const fs::path dir = out_dir(o, "bdrate");
  const fs::path report = dir / "bdrate.txt";
  std::ostringstream text;
  text << "BD-rate: " << fixed(r.percent, 3) << "%\n"
       << "fit: " << (r.piecewise_linear ? "piecewise-linear (fewer than 4 points; reduced accuracy)" : "cubic") << "\n";
  std::ofstream(report) << text.str();
  append_manifest(dir, {"bdrate", "", o.seed, {anchor, test}, {report}, seconds_since(t0),
                        json{{"percent", r.percent}, {"piecewise_linear", r.piecewise_linear}}.dump()});
  if (r.piecewise_linear) std::cerr << "warning: piecewise-linear BD-rate, a curve has fewer than 4 points\n";
  std::cout << text.str();
  return 0;
}

int cmd_macs(const CommonOptions& o, const std::string& preset) {
  const auto t0 = std::chrono::steady_clock::now();
  NetworkConfig net;
  if (!o.config.empty() && !preset.empty()) fail(ErrorKind::Usage, "macs takes --config or --preset, not both");
  if (!o.config.empty()) net = load_network_config(o.config);
  else if (preset == "full") net = full_size_network_config();
  else if (preset.empty() || preset == "desk") net = default_network_config();
  else fail(ErrorKind::Usage, "unknown preset '" + preset + "' (desk, full)");
  const auto b = count_macs_breakdown(net);
  const std::uint64_t total = b.total();
  const fs::path dir = out_dir(o, "macs");
  const fs::path report = dir / "macs.txt";
  std::ostringstream text;
  text << "macs " << total << " (" << fixed(static_cast<double>(total) * 1e-9, 2) << " G for " << net.frames
       << " frames of " << net.width << "x" << net.height << ")\n"
       << "per_frame " << fixed(static_cast<double>(total) * 1e-9 / static_cast<double>(net.frames), 2) << " G\n"
       << "stem " << b.stem << "\n";
  for (std::size_t i = 0; i < b.blocks.size(); ++i) text << "block" << i << " " << b.blocks[i] << "\n";
  text << "head " << b.head << "\nunique_params " << count_unique_params(net) << "\n";
  std::ofstream(report) << text.str();
  std::vector<fs::path> inputs;
  if (!o.config.empty()) inputs.push_back(o.config);
  append_manifest(dir, {"macs", o.config, o.seed, inputs, {report}, seconds_since(t0),
                        json{{"macs", total}, {"preset", preset}}.dump()});
  std::cout << text.str();
  return 0;
}

int cmd_ablate(const CommonOptions& o, const std::string& suite_name, const std::string& corpus_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const AblationSuite suite = parse_ablation_suite(suite_name);
  const NetworkConfig base = o.config.empty() ? default_network_config() : load_network_config(o.config);
  const TrainConfig train = train_from(o);
  const auto cells = ablation_cells(suite, base);
  const fs::path dir = out_dir(o, "ablate");

  std::vector<std::pair<std::string, fs::path>> corpus;
  if (corpus_dir.empty()) {
    const fs::path cdir = dir / "corpus";
    ensure_dir(cdir);
    for (const auto& [name, v] : synth_corpus(base.frames, base.height, base.width, o.seed)) {
      save_raw(cdir / (name + ".rgb"), v);
      corpus.emplace_back(name, cdir / (name + ".rgb"));
    }
  } else {
    if (!fs::is_directory(corpus_dir)) fail(ErrorKind::Io, "corpus directory " + corpus_dir + " does not exist");
    for (const auto& e : fs::directory_iterator(corpus_dir))
      if (e.path().extension() == ".rgb") corpus.emplace_back(e.path().stem().string(), e.path());
    std::sort(corpus.begin(), corpus.end());
    if (corpus.empty()) fail(ErrorKind::Data, "corpus directory " + corpus_dir + " holds no .rgb files");
  }
  std::vector<VideoBuffer> videos;
  for (const auto& [name, path] : corpus) {
    videos.push_back(load_raw(path));
    check_video_matches(base, videos.back(), path.string());
  }

  // each cell owns its directory; the table is assembled afterwards by this thread
  const std::size_t n = cells.size() * corpus.size();
  std::vector<AblationRow> rows(n);
  std::mutex print_mu;
  parallel_for(n, max_parallel_cells(), [&](std::size_t i) {
    const auto& cell = cells[i / corpus.size()];
    const std::size_t s = i % corpus.size();
    const fs::path cdir = dir / "cells" / (cell.name + "__" + corpus[s].first);
    ensure_dir(cdir);
    const EncodeOutcome e = encode_video(cell.config, train, videos[s], o.seed);
    write_binary_file(cdir / "model.inrc", e.bitstream);
    write_train_log(cdir / "train_log.csv", e.log);
    rows[i] = {cell.name, corpus[s].first, e.bpp, e.psnr, count_macs(cell.config)};
    std::lock_guard<std::mutex> lock(print_mu);
    std::cerr << "[" << suite_name << "] " << cell.name << " / " << corpus[s].first << ": bpp " << fixed(e.bpp, 4)
              << " psnr " << fixed(e.psnr, 3) << "\n";
  });

  const fs::path table = dir / ("ablate_" + suite_name + ".csv");
  {
    std::ofstream out(table);
    out << "suite,cell,sequence,bpp,psnr,macs\n";
    out.precision(10);
    for (const auto& r : rows)
      out << suite_name << ',' << r.cell << ',' << r.sequence << ',' << r.bpp << ',' << r.psnr << ',' << r.macs << '\n';
    if (!out) fail(ErrorKind::Io, "cannot write " + table.string());
  }
  std::vector<fs::path> inputs;
  for (const auto& [name, path] : corpus) inputs.push_back(path);
  if (!o.config.empty()) inputs.push_back(o.config);
  if (!o.train.empty()) inputs.push_back(o.train);
  std::vector<fs::path> outputs{table};
  for (const auto& c : cells)
    for (const auto& [name, path] : corpus) outputs.push_back(dir / "cells" / (c.name + "__" + name) / "model.inrc");
  append_manifest(dir, {"ablate", o.config, o.seed, inputs, outputs, seconds_since(t0),
                        json{{"suite", suite_name}, {"cells", cells.size()}, {"sequences", corpus.size()},
                             {"threads", max_parallel_cells()}}
                            .dump()});
  std::cout << "suite,cell,sequence,bpp,psnr,macs\n";
  for (const auto& r : rows)
    std::cout << suite_name << ',' << r.cell << ',' << r.sequence << ',' << fixed(r.bpp, 4) << ',' << fixed(r.psnr, 3)
              << ',' << r.macs << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"reuse-inr: implicit neural video codec with parameter reuse"};
  app.require_subcommand(1);
  CommonOptions o;
  auto common = [&](CLI::App* sub, bool training) {
    sub->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
    sub->add_option("--out", o.out, "run directory (default runs/<command>)");
    if (training) {
      sub->add_option("--config", o.config, "network config file");
      sub->add_option("--train", o.train, "training config file");
      sub->add_option("--scale-epochs", o.scale_epochs, "multiply every epoch count")->check(CLI::PositiveNumber);
    }
  };

  std::string kind, input, reference, bitstream, decoded, label = "run", suite, corpus, anchor, test, preset;
  Index frames = 16, height = 64, width = 64;

  auto* synth = app.add_subcommand("synth", "write a synthetic raw video");
  common(synth, false);
  synth->add_option("--kind", kind, "constant | moving_gradient | bouncing_ball | noise_textured")->required();
  synth->add_option("--frames", frames)->capture_default_str();
  synth->add_option("--height", height)->capture_default_str();
  synth->add_option("--width", width)->capture_default_str();

  auto* encode = app.add_subcommand("encode", "fit a network to a raw video and write its bitstream");
  common(encode, true);
  encode->add_option("--input", input, "raw video (.rgb with .meta sidecar)")->required();

  auto* decode = app.add_subcommand("decode", "reconstruct a raw video from a bitstream");
  common(decode, false);
  decode->add_option("--input", input, "bitstream")->required();

  auto* eval = app.add_subcommand("eval", "PSNR and bpp of a bitstream or decoded video against a reference");
  common(eval, false);
  eval->add_option("--reference", reference)->required();
  eval->add_option("--bitstream", bitstream);
  eval->add_option("--decoded", decoded);
  eval->add_option("--label", label)->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "run a reuse ablation grid over a corpus");
  common(ablate, true);
  ablate->add_option("suite", suite, "location | times | granularity")->required();
  ablate->add_option("--corpus", corpus, "directory of .rgb videos (default: synthesize the standard corpus)");

  auto* bdrate = app.add_subcommand("bdrate", "BD-rate between two RD curves (CSV label,bpp,psnr)");
  common(bdrate, false);
  bdrate->add_option("--anchor", anchor)->required();
  bdrate->add_option("--test", test)->required();

  auto* macs = app.add_subcommand("macs", "decode multiply-accumulate count of a config");
  common(macs, false);
  macs->add_option("--config", o.config, "network config file");
  macs->add_option("--preset", preset, "desk | full");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::Usage);
  }

  try {
    if (*synth) return cmd_synth(o, kind, frames, height, width);
    if (*encode) return cmd_encode(o, input);
    if (*decode) return cmd_decode(o, input);
    if (*eval) return cmd_eval(o, reference, bitstream, decoded, label);
    if (*ablate) return cmd_ablate(o, suite, corpus);
    if (*bdrate) return cmd_bdrate(o, anchor, test);
    if (*macs) return cmd_macs(o, preset);
  } catch (const Error& e) {
    std::cerr << "reuse-inr: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "reuse-inr: " << e.what() << "\n";
    return 1;
  }
  return exit_code(ErrorKind::Usage);
}

}  // namespace reuse_inr
