#include <sys/wait.h>

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>

#include "common.hpp"
#include "derev/config.hpp"
#include "derev/harness.hpp"
#include "derev/wav.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace derev;
using testutil::speech_proxy;

namespace {

int run_cli(const std::string& args, const testutil::TempDir& dir) {
  const std::string cmd = std::string(DEREV_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt") + " 2> " +
                          (dir / "stderr.txt");
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void put_u16(std::ofstream& f, std::uint16_t v) { f.put(char(v & 0xff)).put(char(v >> 8)); }
void put_u32(std::ofstream& f, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) f.put(char((v >> (8 * i)) & 0xff));
}

void write_pcm16(const std::string& path, const std::vector<std::int16_t>& samples, int rate, int channels) {
  std::ofstream f(path, std::ios::binary);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  f.write("RIFF", 4);
  put_u32(f, 36 + data_bytes);
  f.write("WAVEfmt ", 8);
  put_u32(f, 16);
  put_u16(f, 1);
  put_u16(f, static_cast<std::uint16_t>(channels));
  put_u32(f, static_cast<std::uint32_t>(rate));
  put_u32(f, static_cast<std::uint32_t>(rate * channels * 2));
  put_u16(f, static_cast<std::uint16_t>(channels * 2));
  put_u16(f, 16);
  f.write("data", 4);
  put_u32(f, data_bytes);
  for (auto s : samples) put_u16(f, static_cast<std::uint16_t>(s));
}

}  // namespace

TEST_CASE("float WAV round trip is lossless and unnormalised") {
  testutil::TempDir dir("wav");
  Waveform x = speech_proxy(5000, 1);
  x[10] = 1.75;
  x[11] = -3.5;
  write_wav(dir / "a.wav", x);
  const WavData d = read_wav_file(dir / "a.wav");
  CHECK(d.sample_rate == 16000);
  CHECK(d.channels == 1);
  CHECK(d.bits == 32);
  CHECK((d.samples - x).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(d.samples[11] == -3.5);
}

TEST_CASE("16-bit PCM input and format checks") {
  testutil::TempDir dir("pcm");
  write_pcm16(dir / "pcm.wav", {0, 16384, -32768, 32767}, 16000, 1);
  const Waveform w = read_wav(dir / "pcm.wav");
  REQUIRE(w.size() == 4);
  CHECK(w[1] == doctest::Approx(0.5));
  CHECK(w[2] == doctest::Approx(-1.0));

  write_pcm16(dir / "rate.wav", {0, 1, 2, 3}, 44100, 1);
  CHECK_THROWS_WITH_AS(read_wav(dir / "rate.wav"), doctest::Contains("16000"), ConfigError);
  write_pcm16(dir / "stereo.wav", {0, 1, 2, 3}, 16000, 2);
  CHECK_THROWS_AS(read_wav(dir / "stereo.wav"), ConfigError);
  CHECK_THROWS_AS(read_wav(dir / "missing.wav"), IoError);
  {
    std::ofstream f(dir / "junk.wav", std::ios::binary);
    f << "definitely not a wav file";
  }
  CHECK_THROWS_AS(read_wav(dir / "junk.wav"), IoError);
}

TEST_CASE("configuration JSON round trip and strictness") {
  RunConfig cfg;
  cfg.mode = RunMode::Informed;
  cfg.seed = 99;
  cfg.inference.schedule.steps = 17;
  cfg.inference.rir.iterations = 3;
  cfg.inference.op.n_frames = 40;
  cfg.inference.sampler.s_tmax = std::numeric_limits<double>::infinity();
  const nlohmann::json j = to_json(cfg);
  const RunConfig back = run_config_from_json(j);
  CHECK(back.mode == RunMode::Informed);
  CHECK(back.seed == 99);
  CHECK(back.inference.schedule.steps == 17);
  CHECK(back.inference.rir.iterations == 3);
  CHECK(back.inference.op.n_frames == 40);
  CHECK(std::isinf(back.inference.sampler.s_tmax));
  CHECK(to_json(back) == j);

  nlohmann::json bad = j;
  bad["sampler"]["s_churnn"] = 3;
  CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
  bad = j;
  bad["schedule"]["steps"] = "many";
  CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
  CHECK_THROWS_AS(parse_run_mode("fast"), ConfigError);
}

TEST_CASE("command line modes and exit codes") {
  testutil::TempDir dir("cli");
  OperatorConfig op;
  SyntheticRirSpec spec;
  spec.seed = 1;
  const Waveform h = generate_rir(spec, op).h;
  const Waveform y = convolve(speech_proxy(16000, 2), h).head(16000);
  write_wav(dir / "y.wav", y);
  write_wav(dir / "h.wav", h);
  {
    std::ofstream f(dir / "small.json");
    f << R"({"operator": {"n_frames": 12}, "schedule": {"steps": 2}, "rir": {"iterations": 1}})";
  }

  SUBCASE("print config") {
    REQUIRE(run_cli("--print-config --steps 7", dir) == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "stdout.txt"));
    CHECK(j["schedule"]["steps"] == 7);
  }
  SUBCASE("wpe") {
    REQUIRE(run_cli("--mode wpe --in " + (dir / "y.wav") + " --out " + (dir / "x.wav") + " --report " +
                        (dir / "r.json"),
                    dir) == 0);
    CHECK(read_wav(dir / "x.wav").size() == y.size());
    const auto j = nlohmann::json::parse(slurp(dir / "r.json"));
    CHECK(j["schema_version"] == 1);
    CHECK(j["mode"] == "wpe");
    CHECK(j["wpe_objective"].size() == 5);
  }
  SUBCASE("blind with an external peer") {
    REQUIRE(run_cli("--mode blind --config " + (dir / "small.json") + " --in " + (dir / "y.wav") + " --out " +
                        (dir / "x.wav") + " --rir-out " + (dir / "hh.wav") + " --report " + (dir / "r.json") +
                        " --score-model 'external:" + DEREV_PEER_PATH + "'",
                    dir) == 0);
    const Waveform rir = read_wav(dir / "hh.wav");
    CHECK(rir.size() == 12 * 128);
    CHECK(rir[0] == doctest::Approx(1.0).epsilon(1e-6));
    const auto j = nlohmann::json::parse(slurp(dir / "r.json"));
    CHECK(j["steps"].size() == 2);
    CHECK(j["jacobian"] == "identity");
    CHECK(j["params"]["weights_db"].size() == 26);
    CHECK(j.contains("final_cost"));
  }
  SUBCASE("informed") {
    REQUIRE(run_cli("--mode informed --config " + (dir / "small.json") + " --in " + (dir / "y.wav") + " --rir-in " +
                        (dir / "h.wav") + " --out " + (dir / "x.wav") + " --seed 3",
                    dir) == 0);
    CHECK(read_wav(dir / "x.wav").size() == y.size());
  }
  SUBCASE("benchmark") {
    std::filesystem::create_directories(dir.path() / "corpus");
    write_wav((dir.path() / "corpus" / "a.clean.wav").string(), speech_proxy(16000, 5));
    write_wav((dir.path() / "corpus" / "a.rir.wav").string(), h);
    REQUIRE(run_cli("--mode benchmark --pipeline wpe --corpus " + (dir / "corpus") + " --csv " + (dir / "b.csv"),
                    dir) == 0);
    CHECK(slurp(dir / "b.csv").rfind("id,mode,status", 0) == 0);
  }
  SUBCASE("missing input is an I/O failure") {
    CHECK(run_cli("--mode wpe --in " + (dir / "nope.wav") + " --out " + (dir / "x.wav"), dir) == 2);
    CHECK(slurp(dir / "stderr.txt").find("nope.wav") != std::string::npos);
  }
  SUBCASE("invalid configuration") {
    CHECK(run_cli("--mode sideways", dir) == 1);
    CHECK(run_cli("--mode wpe --in " + (dir / "y.wav") + " --out " + (dir / "x.wav") + " --steps 1", dir) == 1);
    {
      std::ofstream f(dir / "bad.json");
      f << R"({"sampler": {"churn": 1}})";
    }
    CHECK(run_cli("--config " + (dir / "bad.json") + " --in " + (dir / "y.wav"), dir) == 1);
    CHECK(run_cli("--mode informed --in " + (dir / "y.wav") + " --out " + (dir / "x.wav"), dir) == 1);
    // validation happens before any output is written
    CHECK_FALSE(std::filesystem::exists(dir / "x.wav"));
  }
  SUBCASE("wrong sample rate") {
    write_wav(dir / "fast.wav", y, 44100);
    CHECK(run_cli("--mode wpe --in " + (dir / "fast.wav") + " --out " + (dir / "x.wav"), dir) == 1);
    CHECK(slurp(dir / "stderr.txt").find("16000") != std::string::npos);
  }
  SUBCASE("score peer failure") {
    CHECK(run_cli("--mode blind --config " + (dir / "small.json") + " --in " + (dir / "y.wav") + " --out " +
                      (dir / "x.wav") + " --score-model 'external:" + DEREV_PEER_PATH + " --mode crash'",
                  dir) == 2);
  }
  SUBCASE("numerical failure") {
    Waveform poisoned = y;
    poisoned[100] = std::numeric_limits<double>::quiet_NaN();
    write_wav(dir / "nan.wav", poisoned);
    CHECK(run_cli("--mode blind --config " + (dir / "small.json") + " --in " + (dir / "nan.wav") + " --out " +
                      (dir / "x.wav"),
                  dir) == 3);
  }
}
