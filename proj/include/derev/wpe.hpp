#pragma once

#include <vector>

#include "derev/signal.hpp"

namespace derev {

struct WpeConfig {
  int iterations = 5;
  int taps = 50;
  int delay = 2;
  double variance_floor = 1e-10;
  double loading = 1e-10;  // relative to the trace of the correlation matrix
  StftConfig stft;

  void validate() const {
    stft.validate();
    if (iterations < 1) throw ConfigError("wpe: iterations must be >= 1");
    if (taps < 1) throw ConfigError("wpe: taps must be >= 1");
    if (delay < 0) throw ConfigError("wpe: delay must be >= 0");
    if (!(variance_floor > 0.0)) throw ConfigError("wpe: variance floor must be positive");
    if (!(loading >= 0.0)) throw ConfigError("wpe: loading must be >= 0");
  }
};

struct WpeResult {
  ComplexSpectrogram spectrogram;
  // Sum over bins of sum_t |d_t|^2 / lambda_t + log lambda_t after each filter update.
  std::vector<double> objective;
};

// Each bin is processed independently of all others.
WpeResult wpe_spectrogram(const ComplexSpectrogram& Y, const WpeConfig& cfg);
Waveform wpe_dereverb(const Waveform& y, const WpeConfig& cfg);

}  // namespace derev
