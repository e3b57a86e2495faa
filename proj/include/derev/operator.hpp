#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "derev/signal.hpp"

namespace derev {

// Band centers as (possibly fractional) frequency-bin positions, ascending.
struct BandLayout {
  std::vector<double> center_bins;
  std::vector<int> counts;  // bands per spacing region, informational

  int size() const { return static_cast<int>(center_bins.size()); }

  // 125 Hz spacing up to 1 kHz, 250 Hz up to 3 kHz, 500 Hz up to 8 kHz.
  static BandLayout standard(const StftConfig& stft);
  static BandLayout from_bins(std::vector<double> bins);

  void validate(int bins) const;
};

struct OperatorConfig {
  int n_frames = 100;
  StftConfig stft;
  BandLayout bands = BandLayout::standard(StftConfig{});

  int bins() const { return stft.bins(); }
  int rir_length() const { return n_frames * stft.hop; }
  void validate() const;
};

// Weights are stored in dB (20 log10 of the linear amplitude), decays in nepers per frame.
struct RirParams {
  Eigen::VectorXd weights_db;
  Eigen::VectorXd decays;
  RealSpectrogram phases;  // n_frames x bins

  Eigen::VectorXd weights() const;

  static RirParams zeros_like(const RirParams& other);
  static RirParams initial(const OperatorConfig& cfg, double weight_db, double decay, std::uint64_t seed);
};

struct ParamBounds {
  double weight_db_min = 0.0;
  double weight_db_max = 40.0;
  double decay_min = 0.5;
  double decay_max = 28.0;
};

RealSpectrogram magnitude_from_params(const RirParams& p, const OperatorConfig& cfg);
ComplexSpectrogram assemble_rir(const RirParams& p, const OperatorConfig& cfg);

// Y[m,k] = sum_n H[n,k] X[m-n,k], with M + N_h - 1 output frames.
ComplexSpectrogram subband_convolve(const ComplexSpectrogram& X, const ComplexSpectrogram& H);
ComplexSpectrogram subband_convolve_adjoint_x(const ComplexSpectrogram& H, const ComplexSpectrogram& GY, int frames);
ComplexSpectrogram subband_convolve_adjoint_h(const ComplexSpectrogram& X, const ComplexSpectrogram& GY, int n_frames);

// Kernel representation: frame n is the fft_size-point spectrum of the hop-length block
// h[n*hop, (n+1)*hop). rir_synthesis inverts it exactly.
ComplexSpectrogram rir_analysis(const Waveform& h, const OperatorConfig& cfg);
Waveform rir_synthesis(const ComplexSpectrogram& H, const OperatorConfig& cfg);

template <typename Derived>
Vector<typename Derived::Scalar> min_phase_project(const Eigen::MatrixBase<Derived>& input, int oversample = 32) {
  using Scalar = typename Derived::Scalar;
  using Complex = std::complex<Scalar>;
  const Vector<Scalar> h = input;
  const Eigen::Index L = h.size();
  if (L == 0) throw SizingError("min_phase_project: empty input");
  if (!h.allFinite()) throw NumericalError("min_phase_project: non-finite input");
  if ((h.array() == Scalar(0)).all()) throw NumericalError("min_phase_project: all-zero input has no log spectrum");

  Eigen::Index n = 64;
  while (n < static_cast<Eigen::Index>(oversample) * L) n *= 2;
  Eigen::FFT<Scalar> fft;
  std::vector<Complex> buf(n, Complex(0)), spec;
  for (Eigen::Index i = 0; i < L; ++i) buf[i] = h[i];
  fft.fwd(spec, buf);
  for (auto& z : spec) z = Complex(std::log(std::max(std::abs(z), Scalar(1e-8))), Scalar(0));
  fft.inv(buf, spec);
  // Fold the real cepstrum onto positive quefrencies.
  const Eigen::Index half = n / 2;
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar c = buf[i].real();
    if (i > 0 && i < half) c *= Scalar(2);
    else if (i > half) c = Scalar(0);
    buf[i] = Complex(c, Scalar(0));
  }
  fft.fwd(spec, buf);
  for (auto& z : spec) z = std::exp(z);
  fft.inv(buf, spec);
  Vector<Scalar> out(L);
  for (Eigen::Index i = 0; i < L; ++i) out[i] = buf[i].real();
  return out;
}

// Minimum-phase reconstruction followed by forcing the direct-path sample to 1.
ComplexSpectrogram apply_projection(const ComplexSpectrogram& H, const OperatorConfig& cfg);

// Output has x.size() + n_frames * hop samples.
Waveform apply_operator(const Waveform& x, const ComplexSpectrogram& H, const OperatorConfig& cfg);
Waveform apply_operator(const Waveform& x, const RirParams& p, const OperatorConfig& cfg);

// Time-domain response of the operator to a unit impulse.
Waveform impulse_response(const ComplexSpectrogram& H, const OperatorConfig& cfg);

struct OperatorGradients {
  Waveform x;
  RirParams params;
};

OperatorGradients operator_gradients(const Waveform& x, const RirParams& p, const OperatorConfig& cfg,
                                     const Waveform& cotangent);
Waveform operator_adjoint_x(const ComplexSpectrogram& H, const OperatorConfig& cfg, const Waveform& cotangent,
                            Eigen::Index input_length);
// Chains a cotangent on H = A exp(i Phi) back to the parameters.
RirParams params_gradient(const RirParams& p, const OperatorConfig& cfg, const ComplexSpectrogram& GH);

}  // namespace derev
