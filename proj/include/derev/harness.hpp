#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "derev/sampler.hpp"

namespace derev {

enum class RirFamily { InFamily, OutOfFamily };

struct SyntheticRirSpec {
  RirFamily family = RirFamily::InFamily;
  int n_frames = 100;
  // In-family draw ranges, inside the parameter box.
  double weight_db_min = 10.0;
  double weight_db_max = 30.0;
  double decay_min = 0.5;
  double decay_max = 2.0;
  // Out-of-family tail: broadband exponential envelope.
  double rt60_seconds = 0.4;
  double drr_db = 0.0;
  std::uint64_t seed = 0;
};

struct GeneratedRir {
  Waveform h;
  std::optional<RirParams> psi;
};

// In-family RIRs are the projected operator response to psi*, so h[0] = 1 in both families.
GeneratedRir generate_rir(const SyntheticRirSpec& spec, const OperatorConfig& op);

// Full linear convolution, length x.size() + h.size() - 1.
Waveform convolve(const Waveform& x, const Waveform& h);

double lsd(const Waveform& x, const Waveform& ref, const StftConfig& cfg = {});
double si_sdr(const Waveform& x, const Waveform& ref);

struct MetricReport {
  double lsd_db = 0.0;
  double si_sdr_db = 0.0;
  double cost_C = 0.0;
};

using ScoreModelFactory = std::function<std::unique_ptr<ScoreModel>(Eigen::Index length)>;

enum class BenchmarkMode { Wpe, Informed, Blind };

struct BenchmarkConfig {
  std::string corpus_dir;
  BenchmarkMode mode = BenchmarkMode::Wpe;
  int jobs = 1;
  std::uint64_t seed = 0;
  InferenceConfig inference;
};

struct BenchmarkRow {
  std::string id;
  bool ok = false;
  std::string message;
  MetricReport input;   // reverberant observation against the clean reference
  MetricReport output;  // processed signal against the clean reference
  double seconds = 0.0;
};

// Items are `<id>.clean.wav` with a matching `<id>.rir.wav`; failures are reported per item.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkConfig& cfg, const ScoreModelFactory& models);
void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkRow>& rows, BenchmarkMode mode);

std::string to_string(BenchmarkMode mode);

}  // namespace derev
