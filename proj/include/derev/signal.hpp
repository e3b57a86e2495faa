#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include "derev/fft.hpp"
#include "derev/types.hpp"

namespace derev {

enum class WindowKind { Hann, Rectangular };

// Frames are placed so that frame t covers input samples [t*hop - pad, t*hop - pad + window_length)
// with pad = window_length - hop. Every input sample is then seen by the same number of frames.
struct StftConfig {
  int window_length = 512;
  int hop = 128;
  int fft_size = 1024;
  int sample_rate = 16000;
  WindowKind window = WindowKind::Hann;

  int bins() const { return fft_size / 2 + 1; }
  int pad() const { return window_length - hop; }

  int frames_for(Eigen::Index length) const {
    return static_cast<int>((length - 1 + pad()) / hop + 1);
  }
  // Length that istft returns by default; stft of that length yields `frames` frames again.
  Eigen::Index length_for(int frames) const {
    return static_cast<Eigen::Index>(frames - 1) * hop + window_length - 2 * pad();
  }

  void validate() const {
    if (hop <= 0 || window_length <= 0 || fft_size <= 0)
      throw ConfigError("stft: sizes must be positive");
    if (hop > window_length || window_length > fft_size)
      throw ConfigError("stft: need hop <= window_length <= fft_size");
    if (fft_size % 2 != 0) throw ConfigError("stft: fft_size must be even");
    if (sample_rate <= 0) throw ConfigError("stft: sample_rate must be positive");
  }
};

template <typename Scalar>
Vector<Scalar> make_window(const StftConfig& cfg) {
  Vector<Scalar> w(cfg.window_length);
  if (cfg.window == WindowKind::Rectangular) {
    w.setOnes();
    return w;
  }
  const Scalar two_pi = Scalar(2) * std::numbers::pi_v<Scalar>;
  for (int j = 0; j < cfg.window_length; ++j)
    w[j] = Scalar(0.5) - Scalar(0.5) * std::cos(two_pi * Scalar(j) / Scalar(cfg.window_length));
  return w;
}

namespace detail {

template <typename Scalar>
void check_bins(const Spectrogram<Scalar>& S, const StftConfig& cfg, const char* what) {
  if (S.cols() != cfg.bins())
    throw ShapeError(std::string(what) + ": spectrogram has " + std::to_string(S.cols()) +
                     " bins, config expects " + std::to_string(cfg.bins()));
}

}  // namespace detail

template <typename Derived>
Spectrogram<typename Derived::Scalar> stft(const Eigen::MatrixBase<Derived>& signal, const StftConfig& cfg) {
  using Scalar = typename Derived::Scalar;
  cfg.validate();
  const Vector<Scalar> x = signal;
  const Eigen::Index L = x.size();
  if (L < cfg.window_length)
    throw SizingError("stft: signal of " + std::to_string(L) + " samples is shorter than one window (" +
                      std::to_string(cfg.window_length) + ")");
  const int M = cfg.frames_for(L);
  const int pad = cfg.pad();
  const Vector<Scalar> w = make_window<Scalar>(cfg);

  Spectrogram<Scalar> S(M, cfg.bins());
  RealFft<Scalar> fft(cfg.fft_size);
  for (int t = 0; t < M; ++t) {
    std::fill(fft.time.begin(), fft.time.end(), Scalar(0));
    const Eigen::Index start = static_cast<Eigen::Index>(t) * cfg.hop - pad;
    for (int j = 0; j < cfg.window_length; ++j) {
      const Eigen::Index i = start + j;
      if (i >= 0 && i < L) fft.time[j] = w[j] * x[i];
    }
    fft.forward();
    for (int k = 0; k < cfg.bins(); ++k) S(t, k) = fft.freq[k];
  }
  return S;
}

// Weighted overlap-add with the canonical dual window. length < 0 selects cfg.length_for(frames).
template <typename Scalar>
Vector<Scalar> istft(const Spectrogram<Scalar>& S, const StftConfig& cfg, Eigen::Index length = -1) {
  cfg.validate();
  detail::check_bins(S, cfg, "istft");
  const int M = static_cast<int>(S.rows());
  if (length < 0) length = cfg.length_for(M);
  if (length < 0) length = 0;
  const int pad = cfg.pad();
  const Vector<Scalar> w = make_window<Scalar>(cfg);

  const Eigen::Index total = M > 0 ? static_cast<Eigen::Index>(M - 1) * cfg.hop + cfg.window_length : 0;
  Vector<Scalar> num = Vector<Scalar>::Zero(total);
  Vector<Scalar> den = Vector<Scalar>::Zero(total);
  RealFft<Scalar> fft(cfg.fft_size);
  for (int t = 0; t < M; ++t) {
    for (int k = 0; k < cfg.bins(); ++k) fft.freq[k] = S(t, k);
    fft.inverse();
    const Eigen::Index start = static_cast<Eigen::Index>(t) * cfg.hop;
    for (int j = 0; j < cfg.window_length; ++j) {
      num[start + j] += w[j] * fft.time[j];
      den[start + j] += w[j] * w[j];
    }
  }
  Vector<Scalar> out = Vector<Scalar>::Zero(length);
  for (Eigen::Index i = 0; i < length; ++i) {
    const Eigen::Index p = i + pad;
    if (p < total && den[p] > Scalar(1e-10)) out[i] = num[p] / den[p];
  }
  return out;
}

template <typename Scalar>
Spectrogram<Scalar> consistency_project(const Spectrogram<Scalar>& S, const StftConfig& cfg) {
  return stft(istft(S, cfg), cfg);
}

// Overlap-adds full fft_size-length frames (no synthesis window), normalized by the analysis
// window's overlap sum. This is the synthesis that makes subband filtering with block-analysed
// kernels reproduce time-domain convolution exactly.
template <typename Scalar>
Vector<Scalar> overlap_add(const Spectrogram<Scalar>& Y, const StftConfig& cfg, Eigen::Index length) {
  cfg.validate();
  detail::check_bins(Y, cfg, "overlap_add");
  const int M = static_cast<int>(Y.rows());
  const int N = cfg.fft_size;
  const int pad = cfg.pad();
  const Scalar norm = make_window<Scalar>(cfg).sum() / Scalar(cfg.hop);

  Vector<Scalar> out = Vector<Scalar>::Zero(length);
  RealFft<Scalar> fft(N);
  for (int m = 0; m < M; ++m) {
    for (int k = 0; k < cfg.bins(); ++k) fft.freq[k] = Y(m, k);
    fft.inverse();
    const Eigen::Index start = static_cast<Eigen::Index>(m) * cfg.hop - pad;
    for (int j = 0; j < N; ++j) {
      const Eigen::Index i = start + j;
      if (i >= 0 && i < length) out[i] += fft.time[j];
    }
  }
  out /= norm;
  return out;
}

// Reverse-mode companions. Cotangents of complex outputs follow the convention that the
// gradient of a real loss f with respect to z is df/dRe(z) + i df/dIm(z).
template <typename Scalar>
Vector<Scalar> stft_adjoint(const Spectrogram<Scalar>& G, const StftConfig& cfg, Eigen::Index length) {
  cfg.validate();
  detail::check_bins(G, cfg, "stft_adjoint");
  const int M = static_cast<int>(G.rows());
  const int N = cfg.fft_size;
  const int pad = cfg.pad();
  const Vector<Scalar> w = make_window<Scalar>(cfg);

  Vector<Scalar> gx = Vector<Scalar>::Zero(length);
  RealFft<Scalar> fft(N);
  const Scalar half = Scalar(N) / Scalar(2);
  for (int t = 0; t < M; ++t) {
    for (int k = 0; k < cfg.bins(); ++k) fft.freq[k] = G(t, k);
    fft.freq[0] *= Scalar(2);
    fft.freq[N / 2] *= Scalar(2);
    fft.inverse();
    const Eigen::Index start = static_cast<Eigen::Index>(t) * cfg.hop - pad;
    for (int j = 0; j < cfg.window_length; ++j) {
      const Eigen::Index i = start + j;
      if (i >= 0 && i < length) gx[i] += w[j] * half * fft.time[j];
    }
  }
  return gx;
}

template <typename Derived>
Spectrogram<typename Derived::Scalar> overlap_add_adjoint(const Eigen::MatrixBase<Derived>& cotangent,
                                                          const StftConfig& cfg, int frames) {
  using Scalar = typename Derived::Scalar;
  cfg.validate();
  const Vector<Scalar> g = cotangent;
  const Eigen::Index length = g.size();
  const int N = cfg.fft_size;
  const int pad = cfg.pad();
  const Scalar norm = make_window<Scalar>(cfg).sum() / Scalar(cfg.hop);

  Spectrogram<Scalar> GY(frames, cfg.bins());
  RealFft<Scalar> fft(N);
  for (int m = 0; m < frames; ++m) {
    const Eigen::Index start = static_cast<Eigen::Index>(m) * cfg.hop - pad;
    for (int j = 0; j < N; ++j) {
      const Eigen::Index i = start + j;
      fft.time[j] = (i >= 0 && i < length) ? g[i] / norm : Scalar(0);
    }
    fft.forward();
    for (int k = 0; k < cfg.bins(); ++k) {
      const Scalar c = (k == 0 || k == N / 2) ? Scalar(1) : Scalar(2);
      GY(m, k) = fft.freq[k] * (c / Scalar(N));
    }
  }
  return GY;
}

}  // namespace derev
