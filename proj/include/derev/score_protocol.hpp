#pragma once

#include <sys/types.h>

#include <cstdint>
#include <string>
#include <vector>

#include "derev/prior.hpp"

namespace derev {

// Wire format, little-endian:
//   request  "SCM1" u32 L  f64 sigma  L x f32
//   response "SCM1" u32 L  L x f32
//   error    "SCER" u32 code
// A request with L = 0 is the handshake; the peer answers with an empty response.
namespace protocol {

inline constexpr char kMagic[4] = {'S', 'C', 'M', '1'};
inline constexpr char kErrorMagic[4] = {'S', 'C', 'E', 'R'};
inline constexpr std::uint32_t kMaxLength = 1u << 28;

std::vector<std::uint8_t> encode_request(const Waveform& x, double sigma);
std::vector<std::uint8_t> encode_response(const Waveform& s);
std::vector<std::uint8_t> encode_error(std::uint32_t code);

struct Request {
  Waveform x;
  double sigma = 0.0;
};

// Blocking helpers over file descriptors. timeout_ms < 0 waits forever.
// Return false on clean end of stream before the first byte of a frame.
bool read_request(int fd, Request& out, int timeout_ms = -1);
bool write_all(int fd, const std::vector<std::uint8_t>& bytes);

}  // namespace protocol

class ProtocolError : public Error {
 public:
  using Error::Error;
};
class TimeoutError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class MalformedFrameError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class LengthMismatchError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class PeerCrashError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class PeerReportedError : public ProtocolError {
 public:
  PeerReportedError(std::uint32_t code)
      : ProtocolError("score peer reported error code " + std::to_string(code)), code(code) {}
  std::uint32_t code;
};

// Score model served by a child process speaking the wire format over stdin/stdout.
// Requests are serialized; the child is terminated on destruction.
class ExternalScoreModel : public ScoreModel {
 public:
  ExternalScoreModel(const std::string& command, double timeout_seconds = 30.0);
  ~ExternalScoreModel() override;
  ExternalScoreModel(const ExternalScoreModel&) = delete;
  ExternalScoreModel& operator=(const ExternalScoreModel&) = delete;

  Waveform score(const Waveform& x, double sigma) override;
  std::string name() const override { return "external:" + command_; }

 private:
  Waveform exchange(const Waveform& x, double sigma);
  void shutdown();

  std::string command_;
  int timeout_ms_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  bool broken_ = false;
};

}  // namespace derev
