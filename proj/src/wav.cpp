#include "derev/wav.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace derev {

namespace {

std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
std::uint16_t le16(const unsigned char* p) { return std::uint16_t(p[0] | p[1] << 8); }

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

}  // namespace

WavData read_wav_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IoError("'" + path + "' is not a RIFF/WAVE file");

  WavData wav;
  int format = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw IoError("'" + path + "' has a truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw IoError("'" + path + "' has a short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = le16(f);
      wav.channels = le16(f + 2);
      wav.sample_rate = static_cast<int>(le32(f + 4));
      wav.bits = le16(f + 14);
      if (format == 0xFFFE && size >= 40) format = le16(f + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw IoError("'" + path + "' has data before fmt");
      const bool pcm16 = format == 1 && wav.bits == 16;
      const bool float32 = format == 3 && wav.bits == 32;
      if (!pcm16 && !float32)
        throw IoError("'" + path + "': only 16-bit PCM and 32-bit float WAV are supported");
      if (wav.channels < 1) throw IoError("'" + path + "' declares no channels");
      const std::size_t width = wav.bits / 8;
      const std::size_t frames = size / (width * wav.channels);
      wav.samples.resize(static_cast<Eigen::Index>(frames * wav.channels));
      const unsigned char* d = bytes.data() + body;
      for (std::size_t i = 0; i < frames * wav.channels; ++i) {
        if (pcm16)
          wav.samples[i] = static_cast<std::int16_t>(le16(d + 2 * i)) / 32768.0;
        else
          wav.samples[i] = std::bit_cast<float>(le32(d + 4 * i));
      }
      return wav;
    }
    pos = body + size + (size & 1);
  }
  throw IoError("'" + path + "' has no data chunk");
}

Waveform read_wav(const std::string& path, int required_rate) {
  WavData wav = read_wav_file(path);
  if (wav.channels != 1)
    throw ConfigError("'" + path + "' has " + std::to_string(wav.channels) + " channels; convert it to mono first");
  if (wav.sample_rate != required_rate)
    throw ConfigError("'" + path + "' is sampled at " + std::to_string(wav.sample_rate) + " Hz; " +
                      std::to_string(required_rate) + " Hz is required (resample it first)");
  if (!wav.samples.allFinite()) throw NumericalError("'" + path + "' contains non-finite samples");
  return wav.samples;
}

void write_wav(const std::string& path, const Waveform& samples, int sample_rate) {
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 4);
  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 3);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * 4);
  put16(out, 4);
  put16(out, 32);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_bytes);
  for (Eigen::Index i = 0; i < samples.size(); ++i) put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(samples[i])));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing '" + path + "'");
}

}  // namespace derev
