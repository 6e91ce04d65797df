// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "reuse_inr/harness.hpp"

using namespace reuse_inr;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "reuse_inr_cli_tests";

constexpr const char* kSmallNet = R"(format = reuse-inr-network/1
video = 2 16 16
patch = 2 2
base_grid = 1 2 2 2
stem_channels = 4
depths = 2 2 2
channels = 4 4 4
scales = 2 2 2
local_grids = 1 2 2 1 ; 1 4 4 1 ; 1 8 8 1
expansion = 2
kernel = 3
head_kernel = 3
reuse.mode = none
reuse.granularity = convnext_block
reuse.multiplier = 1
reuse.mask = 1 1 1
)";

constexpr const char* kShortTrain = R"(format = reuse-inr-train/1
epochs = 3
warmup_epochs = 1
qat_epochs = 1
lr = 0.005
)";

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const fs::path log = kRoot / "last_stdout.txt";
  const std::string cmd = std::string(REUSE_INR_CLI) + " " + args + " > " + log.string() + " 2> " +
                          (kRoot / "last_stderr.txt").string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(log);
  return r;
}

fs::path write(const std::string& name, const std::string& text) {
  const fs::path p = kRoot / name;
  std::ofstream(p) << text;
  return p;
}

std::vector<std::string> lines(const fs::path& p) {
  std::istringstream in(read_text_file(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

struct Setup {
  Setup() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
};
const Setup setup_once;

}  // namespace

TEST_CASE("usage errors exit with the usage code") {
  CHECK(cli("").code == 2);
  CHECK(cli("frobnicate").code == 2);
  CHECK(cli("synth --kind plasma --out " + (kRoot / "bad").string()).code == 2);
  CHECK(cli("ablate sideways --out " + (kRoot / "bad").string()).code == 2);
  CHECK(cli("--help").code == 0);
}

TEST_CASE("synth is deterministic and records digests") {
  const auto a = kRoot / "synth_a", b = kRoot / "synth_b";
  REQUIRE(cli("synth --kind bouncing_ball --frames 3 --height 8 --width 12 --seed 4 --out " + a.string()).code == 0);
  REQUIRE(cli("synth --kind bouncing_ball --frames 3 --height 8 --width 12 --seed 4 --out " + b.string()).code == 0);
  CHECK(sha256_file(a / "bouncing_ball.rgb") == sha256_file(b / "bouncing_ball.rgb"));
  const auto m = lines(a / "manifest.jsonl");
  REQUIRE(m.size() == 1);
  CHECK(m[0].find(sha256_file(a / "bouncing_ball.rgb")) != std::string::npos);
  REQUIRE(cli("synth --kind constant --frames 3 --height 8 --width 12 --out " + a.string()).code == 0);
  CHECK(lines(a / "manifest.jsonl").size() == 2);
}

TEST_CASE("bdrate of a curve against itself prints zero") {
  const auto csv = write("curve.csv", "label,bpp,psnr\na,0.1,28\nb,0.2,31\nc,0.4,33.5\nd,0.8,35.2\n");
  const auto r = cli("bdrate --anchor " + csv.string() + " --test " + csv.string() + " --out " + (kRoot / "bd").string());
  CHECK(r.code == 0);
  CHECK(r.out.find("BD-rate: 0.000%") != std::string::npos);
  const auto bad = write("bad.csv", "label,bpp,psnr\na,0.1,50\nb,0.2,51\n");
  CHECK(cli("bdrate --anchor " + csv.string() + " --test " + bad.string() + " --out " + (kRoot / "bd").string()).code == 8);
}

TEST_CASE("macs reports the full-size preset") {
  const auto r = cli("macs --preset full --out " + (kRoot / "macs").string());
  CHECK(r.code == 0);
  CHECK(r.out.find("macs " + std::to_string(count_macs(full_size_network_config()))) != std::string::npos);
  const auto cfg = write("small.cfg", kSmallNet);
  CHECK(cli("macs --config " + cfg.string() + " --out " + (kRoot / "macs").string()).code == 0);
  const auto broken = write("broken.cfg", std::string(kSmallNet) + "surprise = 1\n");
  CHECK(cli("macs --config " + broken.string() + " --out " + (kRoot / "macs").string()).code == 3);
}

TEST_CASE("encode, decode and eval agree and are deterministic") {
  const auto cfg = write("small.cfg", kSmallNet);
  const auto train = write("short.train", kShortTrain);
  const auto video_dir = kRoot / "enc_video";
  REQUIRE(cli("synth --kind noise_textured --frames 2 --height 16 --width 16 --seed 1 --out " + video_dir.string()).code == 0);
  const auto video = video_dir / "noise_textured.rgb";
  std::string enc_digest;
  for (const char* name : {"enc1", "enc2"}) {
    const auto dir = kRoot / name;
    const auto r = cli("encode --input " + video.string() + " --config " + cfg.string() + " --train " + train.string() +
                       " --seed 3 --out " + dir.string());
    REQUIRE(r.code == 0);
    CHECK(r.out.find("bpp ") != std::string::npos);
    if (enc_digest.empty()) enc_digest = sha256_file(dir / "model.inrc");
    else CHECK(sha256_file(dir / "model.inrc") == enc_digest);
  }
  const auto dec = kRoot / "dec1";
  REQUIRE(cli("decode --input " + (kRoot / "enc1" / "model.inrc").string() + " --out " + dec.string()).code == 0);
  CHECK(sha256_file(dec / "decoded.rgb") == sha256_file(kRoot / "enc1" / "encoder_recon.rgb"));
  CHECK(read_text_file(dec / "manifest.jsonl").find("decode_runtime_s") != std::string::npos);

  const auto ev = cli("eval --reference " + video.string() + " --bitstream " + (kRoot / "enc1" / "model.inrc").string() +
                      " --label small --out " + (kRoot / "eval").string());
  CHECK(ev.code == 0);
  const auto rd = read_rd_csv(kRoot / "eval" / "rd.csv");
  REQUIRE(rd.size() == 1);
  CHECK(rd[0].label == "small");
  CHECK(rd[0].bpp == bpp(fs::file_size(kRoot / "enc1" / "model.inrc"), 2, 16, 16));
  CHECK(rd[0].psnr == psnr(load_raw(video), load_raw(kRoot / "enc1" / "encoder_recon.rgb").to_float()));
}

TEST_CASE("decode rejects damaged bitstreams with distinct codes") {
  const auto cfg = write("small.cfg", kSmallNet);
  const auto stream = kRoot / "dmg.inrc";
  auto bytes = pack_model(init_parameters(load_network_config(cfg), 1), load_network_config(cfg));
  auto bad = bytes;
  bad[0] = 'J';
  write_binary_file(stream, bad);
  CHECK(cli("decode --input " + stream.string() + " --out " + (kRoot / "dmg").string()).code == 6);
  bad = bytes;
  bad.resize(bytes.size() - 3);
  write_binary_file(stream, bad);
  CHECK(cli("decode --input " + stream.string() + " --out " + (kRoot / "dmg").string()).code == 7);
  CHECK(cli("decode --input " + (kRoot / "nope.inrc").string() + " --out " + (kRoot / "dmg").string()).code == 9);
}

TEST_CASE("encode rejects a video that does not match the config") {
  const auto cfg = write("small.cfg", kSmallNet);
  const auto dir = kRoot / "mismatch";
  REQUIRE(cli("synth --kind constant --frames 3 --height 16 --width 16 --out " + dir.string()).code == 0);
  CHECK(cli("encode --input " + (dir / "constant.rgb").string() + " --config " + cfg.string() + " --out " + dir.string())
            .code == 3);
}

TEST_CASE("ablate location covers every cell and sequence") {
  const auto cfg = write("small.cfg", kSmallNet);
  const auto train = write("short.train", kShortTrain);
  const auto dir = kRoot / "ablate";
  setenv("REUSE_INR_THREADS", "2", 1);
  REQUIRE(cli("ablate location --config " + cfg.string() + " --train " + train.string() + " --scale-epochs 0.5 --out " +
              dir.string())
              .code == 0);
  unsetenv("REUSE_INR_THREADS");
  const auto rows = lines(dir / "ablate_location.csv");
  REQUIRE(rows.size() == 1 + 3 * 4);
  CHECK(rows[0] == "suite,cell,sequence,bpp,psnr,macs");
  auto macs_of = [&](const std::string& cell) {
    for (const auto& r : rows)
      if (r.find("location," + cell + ",") == 0) return std::stoull(r.substr(r.rfind(',') + 1));
    return 0ull;
  };
  CHECK(macs_of("shallow") < macs_of("medium"));
  CHECK(macs_of("medium") <= macs_of("deep"));
}

TEST_CASE("ablation grids have the documented sizes") {
  const auto base = default_network_config();
  CHECK(ablation_cells(AblationSuite::Location, base).size() == 3);
  const auto times = ablation_cells(AblationSuite::Times, base);
  REQUIRE(times.size() == 4);
  CHECK(times[1].config.reuse.multiplier == 2);
  CHECK(ablation_cells(AblationSuite::Granularity, base).size() == 3);
}

TEST_CASE("thread count comes from the environment") {
  unsetenv("REUSE_INR_THREADS");
  CHECK(max_parallel_cells() == 1);
  setenv("REUSE_INR_THREADS", "3", 1);
  CHECK(max_parallel_cells() == 3);
  setenv("REUSE_INR_THREADS", "zero", 1);
  CHECK_THROWS_AS(max_parallel_cells(), Error);
  unsetenv("REUSE_INR_THREADS");
}
