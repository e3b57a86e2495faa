#include "derev/score_protocol.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>

namespace derev {

namespace protocol {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_samples(std::vector<std::uint8_t>& out, const Waveform& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(x[i])));
}

Waveform get_samples(const std::vector<std::uint8_t>& bytes, std::uint32_t n) {
  Waveform x(n);
  for (std::uint32_t i = 0; i < n; ++i) x[i] = std::bit_cast<float>(get_u32(bytes.data() + 4 * i));
  return x;
}

enum class ReadStatus { Ok, Eof, Timeout, Failed };

using Clock = std::chrono::steady_clock;

// Reads exactly n bytes unless the stream ends, the deadline passes, or an error occurs.
ReadStatus read_exact(int fd, std::uint8_t* buf, std::size_t n, int timeout_ms, Clock::time_point start,
                      std::size_t* got = nullptr) {
  std::size_t done = 0;
  while (done < n) {
    int wait = -1;
    if (timeout_ms >= 0) {
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
      wait = static_cast<int>(std::max<long long>(0, timeout_ms - elapsed));
    }
    pollfd pfd{fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, wait);
    if (rc < 0) {
      if (errno == EINTR) continue;
      return ReadStatus::Failed;
    }
    if (rc == 0) return ReadStatus::Timeout;
    const ssize_t r = ::read(fd, buf + done, n - done);
    if (r < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      return ReadStatus::Failed;
    }
    if (r == 0) {
      if (got) *got = done;
      return ReadStatus::Eof;
    }
    done += static_cast<std::size_t>(r);
  }
  if (got) *got = done;
  return ReadStatus::Ok;
}

}  // namespace

std::vector<std::uint8_t> encode_request(const Waveform& x, double sigma) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(x.size()));
  put_u64(out, std::bit_cast<std::uint64_t>(sigma));
  put_samples(out, x);
  return out;
}

std::vector<std::uint8_t> encode_response(const Waveform& s) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  put_samples(out, s);
  return out;
}

std::vector<std::uint8_t> encode_error(std::uint32_t code) {
  std::vector<std::uint8_t> out(kErrorMagic, kErrorMagic + 4);
  put_u32(out, code);
  return out;
}

bool read_request(int fd, Request& out, int timeout_ms) {
  const auto start = Clock::now();
  std::uint8_t head[16];
  std::size_t got = 0;
  ReadStatus st = read_exact(fd, head, sizeof head, timeout_ms, start, &got);
  if (st == ReadStatus::Eof && got == 0) return false;
  if (st == ReadStatus::Timeout) throw TimeoutError("score protocol: timed out reading request");
  if (st != ReadStatus::Ok) throw MalformedFrameError("score protocol: truncated request header");
  if (std::memcmp(head, kMagic, 4) != 0) throw MalformedFrameError("score protocol: bad request magic");
  const std::uint32_t n = get_u32(head + 4);
  if (n > kMaxLength) throw MalformedFrameError("score protocol: request length out of range");
  out.sigma = std::bit_cast<double>(get_u64(head + 8));
  std::vector<std::uint8_t> body(4 * static_cast<std::size_t>(n));
  st = read_exact(fd, body.data(), body.size(), timeout_ms, start);
  if (st == ReadStatus::Timeout) throw TimeoutError("score protocol: timed out reading request body");
  if (st != ReadStatus::Ok) throw MalformedFrameError("score protocol: truncated request body");
  out.x = get_samples(body, n);
  return true;
}

bool write_all(int fd, const std::vector<std::uint8_t>& bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t w = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (w < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    done += static_cast<std::size_t>(w);
  }
  return true;
}

}  // namespace protocol

ExternalScoreModel::ExternalScoreModel(const std::string& command, double timeout_seconds)
    : command_(command), timeout_ms_(static_cast<int>(std::lround(timeout_seconds * 1000.0))) {
  if (command.empty()) throw ConfigError("external score model: empty command");
  // A dead peer must surface as an error, not terminate this process.
  struct sigaction ignore {};
  ignore.sa_handler = SIG_IGN;
  sigaction(SIGPIPE, &ignore, nullptr);

  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw IoError("external score model: pipe failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw IoError("external score model: pipe failed");
  }
  pid_ = ::fork();
  if (pid_ < 0) throw IoError("external score model: fork failed");
  if (pid_ == 0) {
    // Own process group, so shutdown reaches whatever the shell starts.
    ::setpgid(0, 0);
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid_, pid_);
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);

  try {
    exchange(Waveform(), 0.0);
  } catch (...) {
    shutdown();
    throw;
  }
}

ExternalScoreModel::~ExternalScoreModel() { shutdown(); }

void ExternalScoreModel::shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        ::kill(-pid_, SIGKILL);
        pid_ = -1;
        return;
      }
      ::usleep(10000);
    }
    ::kill(-pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

Waveform ExternalScoreModel::score(const Waveform& x, double sigma) {
  if (broken_) throw ProtocolError("external score model: connection unusable after an earlier failure");
  try {
    return exchange(x, sigma);
  } catch (const ProtocolError&) {
    broken_ = true;
    throw;
  }
}

Waveform ExternalScoreModel::exchange(const Waveform& x, double sigma) {
  using namespace protocol;
  if (!write_all(to_child_, encode_request(x, sigma)))
    throw PeerCrashError("external score model: peer closed its input (" + command_ + ")");

  const auto start = std::chrono::steady_clock::now();
  std::uint8_t head[8];
  const ReadStatus st = read_exact(from_child_, head, sizeof head, timeout_ms_, start);
  if (st == ReadStatus::Timeout)
    throw TimeoutError("external score model: no response within " + std::to_string(timeout_ms_) + " ms");
  if (st == ReadStatus::Eof || st == ReadStatus::Failed)
    throw PeerCrashError("external score model: peer exited or closed its output (" + command_ + ")");
  if (std::memcmp(head, kErrorMagic, 4) == 0) throw PeerReportedError(get_u32(head + 4));
  if (std::memcmp(head, kMagic, 4) != 0) throw MalformedFrameError("external score model: bad response magic");
  const std::uint32_t n = get_u32(head + 4);
  if (n != static_cast<std::uint32_t>(x.size()))
    throw LengthMismatchError("external score model: response has " + std::to_string(n) + " samples, expected " +
                              std::to_string(x.size()));
  std::vector<std::uint8_t> body(4 * static_cast<std::size_t>(n));
  const ReadStatus bs = read_exact(from_child_, body.data(), body.size(), timeout_ms_, start);
  if (bs == ReadStatus::Timeout) throw TimeoutError("external score model: response body timed out");
  if (bs != ReadStatus::Ok) throw PeerCrashError("external score model: response truncated");
  return get_samples(body, n);
}

}  // namespace derev
