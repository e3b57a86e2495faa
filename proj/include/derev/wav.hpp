#pragma once

#include <string>

#include "derev/types.hpp"

namespace derev {

struct WavData {
  Waveform samples;
  int sample_rate = 0;
  int channels = 0;
  int bits = 0;
};

// Accepts 16-bit PCM and 32-bit float files. Throws IoError for unreadable or corrupt files.
WavData read_wav_file(const std::string& path);

// Mono at the required rate, otherwise ConfigError.
Waveform read_wav(const std::string& path, int required_rate = 16000);

// 32-bit float mono.
void write_wav(const std::string& path, const Waveform& samples, int sample_rate = 16000);

}  // namespace derev
