#include <cmath>
#include <fstream>
#include <sstream>

#include "common.hpp"
#include "derev/harness.hpp"
#include "derev/wav.hpp"
#include "doctest.h"

using namespace derev;
using testutil::noise;
using testutil::rel_err;
using testutil::speech_proxy;

TEST_CASE("synthetic RIRs") {
  OperatorConfig op;
  SUBCASE("in family") {
    SyntheticRirSpec spec;
    spec.seed = 4;
    const GeneratedRir a = generate_rir(spec, op);
    REQUIRE(a.psi.has_value());
    CHECK(a.h.size() == op.rir_length());
    CHECK(a.h[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(a.h.allFinite());
    CHECK(a.psi->weights_db.minCoeff() >= 10.0);
    CHECK(a.psi->decays.maxCoeff() <= 2.0);
    const GeneratedRir b = generate_rir(spec, op);
    CHECK(a.h == b.h);
    // the response the operator produces for psi* after projection
    const ComplexSpectrogram Hbar = apply_projection(assemble_rir(*a.psi, op), op);
    CHECK(rel_err(impulse_response(Hbar, op).head(a.h.size()), a.h) < 1e-10);
  }
  SUBCASE("maximal decay leaves nothing after the first frame") {
    SyntheticRirSpec spec;
    spec.decay_min = spec.decay_max = 28.0;
    spec.seed = 5;
    const Waveform h = generate_rir(spec, op).h;
    const double tail = h.tail(h.size() - op.stft.hop).squaredNorm();
    CHECK(tail < 1e-6 * h.squaredNorm());
  }
  SUBCASE("out of family") {
    SyntheticRirSpec spec;
    spec.family = RirFamily::OutOfFamily;
    spec.drr_db = 3.0;
    spec.seed = 6;
    const GeneratedRir g = generate_rir(spec, op);
    CHECK_FALSE(g.psi.has_value());
    CHECK(g.h[0] == 1.0);
    const double drr = 10.0 * std::log10(1.0 / g.h.tail(g.h.size() - 1).squaredNorm());
    CHECK(drr == doctest::Approx(3.0).epsilon(1e-9));
  }
  SUBCASE("different seeds differ") {
    SyntheticRirSpec a, b;
    a.seed = 1;
    b.seed = 2;
    CHECK(generate_rir(a, op).h != generate_rir(b, op).h);
  }
}

TEST_CASE("in-family rendering through the operator matches direct convolution") {
  OperatorConfig op;
  SyntheticRirSpec spec;
  spec.seed = 8;
  const GeneratedRir g = generate_rir(spec, op);
  const Waveform x = speech_proxy(8000, 8);
  const Waveform via_op = apply_operator(x, apply_projection(assemble_rir(*g.psi, op), op), op);
  const Waveform direct = convolve(x, g.h);
  CHECK(rel_err(via_op.head(direct.size()), direct) < 1e-4);
}

TEST_CASE("FFT convolution equals the direct sum") {
  const Waveform x = noise(300, 1), h = noise(77, 2);
  Waveform ref = Waveform::Zero(376);
  for (int i = 0; i < 300; ++i)
    for (int j = 0; j < 77; ++j) ref[i + j] += x[i] * h[j];
  CHECK(rel_err(convolve(x, h), ref) < 1e-12);
  CHECK(convolve(x, Waveform(0)).size() == 0);
}

TEST_CASE("log-spectral distance") {
  const Waveform ref = noise(4000, 3);
  CHECK(lsd(ref, ref) == 0.0);
  CHECK(lsd(Waveform(2.0 * ref), ref) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-9));
  const Waveform other = noise(4000, 4);
  CHECK(lsd(other, ref) == doctest::Approx(lsd(ref, other)).epsilon(1e-12));
  CHECK_THROWS_AS(lsd(ref, Waveform(ref.head(3999))), ShapeError);
}

TEST_CASE("scale-invariant SDR") {
  const Waveform ref = noise(4000, 5);
  CHECK(si_sdr(Waveform(-3.0 * ref), ref) == 100.0);
  Waveform orth = noise(4000, 6);
  orth -= (orth.dot(ref) / ref.squaredNorm()) * ref;
  CHECK(si_sdr(orth, ref) == -100.0);
  // 1% residual energy
  Waveform n = orth * std::sqrt(0.01 * ref.squaredNorm() / orth.squaredNorm());
  CHECK(si_sdr(Waveform(ref + n), ref) == doctest::Approx(20.0).epsilon(1e-9));
  CHECK_THROWS_AS(si_sdr(ref, Waveform::Zero(4000)), NumericalError);
}

namespace {

void write_corpus(const testutil::TempDir& dir, int items) {
  OperatorConfig op;
  for (int i = 0; i < items; ++i) {
    SyntheticRirSpec spec;
    spec.seed = 100 + i;
    const std::string id = "utt" + std::to_string(i);
    write_wav(dir / (id + ".clean.wav"), speech_proxy(24000, 200 + i));
    write_wav(dir / (id + ".rir.wav"), generate_rir(spec, op).h);
  }
}

}  // namespace

TEST_CASE("benchmark over a small corpus") {
  testutil::TempDir dir("corpus");
  write_corpus(dir, 3);
  write_wav(dir / "zbroken.clean.wav", speech_proxy(16000, 9));  // no matching RIR

  BenchmarkConfig cfg;
  cfg.corpus_dir = dir.path().string();
  cfg.mode = BenchmarkMode::Wpe;
  cfg.jobs = 2;
  const auto rows = run_benchmark(cfg, nullptr);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].id == "utt0");
  CHECK(rows[3].id == "zbroken");
  CHECK_FALSE(rows[3].ok);
  CHECK_FALSE(rows[3].message.empty());
  double gain = 0.0;
  for (int i = 0; i < 3; ++i) {
    REQUIRE(rows[i].ok);
    gain += rows[i].input.lsd_db - rows[i].output.lsd_db;
  }
  CHECK(gain > 0.0);

  cfg.jobs = 1;
  const auto again = run_benchmark(cfg, nullptr);
  for (int i = 0; i < 3; ++i) CHECK(again[i].output.lsd_db == rows[i].output.lsd_db);

  std::ostringstream csv;
  write_benchmark_csv(csv, rows, cfg.mode);
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "id,mode,status,lsd_in_db,lsd_out_db,si_sdr_in_db,si_sdr_out_db,cost_in,cost_out,seconds,pesq,estoi,"
                "dnsmos,message");
  int n = 0;
  std::string last;
  while (std::getline(lines, line)) {
    ++n;
    last = line;
    // every row has the full column count outside the quoted message
    const auto quote = line.find('"');
    CHECK(std::count(line.begin(), line.begin() + static_cast<long>(quote), ',') == 13);
  }
  CHECK(n == 5);
  CHECK(last.rfind("mean,wpe,aggregate,", 0) == 0);
}

TEST_CASE("empty corpus gives an empty table, a missing one is an error") {
  testutil::TempDir dir("empty");
  BenchmarkConfig cfg;
  cfg.corpus_dir = dir.path().string();
  CHECK(run_benchmark(cfg, nullptr).empty());
  cfg.corpus_dir = dir / "missing";
  CHECK_THROWS_AS(run_benchmark(cfg, nullptr), IoError);
}
