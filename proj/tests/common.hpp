#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "derev/objective.hpp"
#include "derev/operator.hpp"
#include "derev/signal.hpp"
#include "derev/types.hpp"

namespace testutil {

inline derev::Waveform noise(Eigen::Index n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  derev::Waveform x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = scale * normal(rng);
  return x;
}

inline derev::ComplexSpectrogram complex_noise(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  derev::ComplexSpectrogram S(rows, cols);
  for (Eigen::Index i = 0; i < S.size(); ++i) S.data()[i] = {normal(rng), normal(rng)};
  return S;
}

template <typename A, typename B>
double rel_err(const A& a, const B& b) {
  const double den = b.norm();
  return den > 0.0 ? (a - b).norm() / den : (a - b).norm();
}

// Real inner product Re sum conj(a) b, treating complex arrays as pairs of reals.
template <typename A, typename B>
double real_dot(const A& a, const B& b) {
  return (a.conjugate().cwiseProduct(b)).sum().real();
}

// Clean speech stand-in: noise bursts of 50-150 ms separated by short pauses, shaped by two
// resonances, scaled to a standard deviation of `level`.
inline derev::Waveform speech_proxy(Eigen::Index n, std::uint64_t seed, double level = 0.05) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> burst(800, 2400), gap(200, 800);
  std::uniform_real_distribution<double> freq(0.05, 0.35);
  derev::Waveform x = derev::Waveform::Zero(n);
  Eigen::Index pos = 0;
  while (pos < n) {
    const Eigen::Index len = std::min<Eigen::Index>(burst(rng), n - pos);
    const double f1 = freq(rng), f2 = freq(rng);
    double a1 = 0, a2 = 0, b1 = 0, b2 = 0;
    for (Eigen::Index i = 0; i < len; ++i) {
      const double e = normal(rng);
      const double a = e + 2 * 0.95 * std::cos(2 * 3.141592653589793 * f1) * a1 - 0.9025 * a2;
      const double b = a + 2 * 0.9 * std::cos(2 * 3.141592653589793 * f2) * b1 - 0.81 * b2;
      a2 = a1;
      a1 = a;
      b2 = b1;
      b1 = b;
      x[pos + i] = b;
    }
    pos += len + gap(rng);
  }
  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().mean());
  return sd > 0 ? derev::Waveform(x * (level / sd)) : x;
}

// Independent evaluation of the regulariser with its target frozen at p0.
inline double frozen_regularizer(const derev::RirParams& p, const derev::RirParams& p0, double sp,
                                 std::uint64_t seed, const derev::OperatorConfig& op,
                                 const derev::CompressionConfig& c) {
  derev::Waveform delta = derev::Waveform::Zero(op.stft.window_length);
  delta[0] = 1.0;
  derev::Waveform target = derev::apply_operator(delta, p0, op);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < target.size(); ++i) target[i] += sp * normal(rng);
  const derev::Waveform h = derev::apply_operator(delta, p, op);
  const derev::ComplexSpectrogram d =
      derev::compress(derev::stft(h, c.stft), c.exponent) - derev::compress(derev::stft(target, c.stft), c.exponent);
  return d.squaredNorm() / op.n_frames;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("derev-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
