#pragma once

#include <cstdint>

#include "derev/operator.hpp"

namespace derev {

struct CompressionConfig {
  double exponent = 2.0 / 3.0;
  StftConfig stft;

  void validate() const {
    if (!(exponent > 0.0 && exponent <= 1.0)) throw ConfigError("compression: exponent must lie in (0, 1]");
    stft.validate();
  }
};

// |S|^e with the phase of S kept; zero stays zero.
template <typename Scalar>
Spectrogram<Scalar> compress(const Spectrogram<Scalar>& S, double exponent) {
  if (exponent == 1.0) return S;
  const Scalar e = static_cast<Scalar>(exponent);
  Spectrogram<Scalar> out(S.rows(), S.cols());
  for (Eigen::Index i = 0; i < S.size(); ++i) {
    const auto z = S.data()[i];
    const Scalar r = std::abs(z);
    out.data()[i] = r > Scalar(0) ? z * std::pow(r, e - Scalar(1)) : std::complex<Scalar>(0);
  }
  return out;
}

// Pulls a cotangent on compress(S) back to S.
template <typename Scalar>
Spectrogram<Scalar> compress_vjp(const Spectrogram<Scalar>& S, const Spectrogram<Scalar>& G, double exponent) {
  if (exponent == 1.0) return G;
  const Scalar e = static_cast<Scalar>(exponent);
  Spectrogram<Scalar> out(S.rows(), S.cols());
  for (Eigen::Index i = 0; i < S.size(); ++i) {
    const auto z = S.data()[i];
    const auto g = G.data()[i];
    const Scalar r = std::abs(z);
    if (r == Scalar(0)) {
      out.data()[i] = 0;
      continue;
    }
    const Scalar re1 = std::pow(r, e - Scalar(1));
    out.data()[i] = g * (re1 * (e + Scalar(1)) / Scalar(2)) +
                    std::conj(g) * z * z * (re1 / (r * r) * (e - Scalar(1)) / Scalar(2));
  }
  return out;
}

// (1/M) sum |compress(stft y) - compress(stft yhat)|^2 with the shorter signal zero-padded.
double cost(const Waveform& y, const Waveform& yhat, const CompressionConfig& c);

// Cost against a fixed observation, for repeated evaluation with estimates of a fixed length.
class ReconstructionCost {
 public:
  ReconstructionCost(const Waveform& y, const CompressionConfig& c, Eigen::Index estimate_length);

  double value(const Waveform& yhat) const;
  // Returns the cost and writes d cost / d yhat.
  double value_and_gradient(const Waveform& yhat, Waveform& gradient) const;

  int frames() const { return frames_; }
  Eigen::Index padded_length() const { return length_; }

 private:
  Waveform padded(const Waveform& yhat) const;

  CompressionConfig c_;
  Eigen::Index length_;
  Eigen::Index estimate_length_;
  int frames_;
  ComplexSpectrogram target_;
};

enum class LikelihoodWeighting { NormNormalized, Constant };

inline double likelihood_weight(double grad_norm, Eigen::Index n_elems, double zeta_prime, double eps = 1e-8) {
  return zeta_prime * std::sqrt(static_cast<double>(n_elems)) / (grad_norm + eps);
}

struct RegularizerSchedule {
  double sigma_min = 5e-4;
  double sigma_max = 1e-2;

  void validate() const {
    if (!(sigma_min > 0.0 && sigma_min <= sigma_max))
      throw ConfigError("regularizer: need 0 < sigma_min <= sigma_max");
  }
};

inline double sigma_prime(double sigma, const RegularizerSchedule& s) {
  return std::clamp(sigma, s.sigma_min, s.sigma_max);
}

struct RegularizerValue {
  double value = 0.0;
  RirParams gradient;
};

// Compares the compressed spectrogram of the operator's impulse response with a noisy, detached
// copy of itself. The noise draw is determined by `seed`.
RegularizerValue noise_regularizer(const RirParams& p, double sigma_prime, std::uint64_t seed,
                                   const OperatorConfig& op, const CompressionConfig& c);

}  // namespace derev
