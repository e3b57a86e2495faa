#include "derev/objective.hpp"

#include <random>

namespace derev {

namespace {

Waveform zero_pad(const Waveform& x, Eigen::Index length) {
  Waveform out = Waveform::Zero(length);
  out.head(x.size()) = x;
  return out;
}

}  // namespace

double cost(const Waveform& y, const Waveform& yhat, const CompressionConfig& c) {
  const Eigen::Index length = std::max(y.size(), yhat.size());
  const ComplexSpectrogram a = compress(stft(zero_pad(y, length), c.stft), c.exponent);
  const ComplexSpectrogram b = compress(stft(zero_pad(yhat, length), c.stft), c.exponent);
  return (a - b).squaredNorm() / static_cast<double>(a.rows());
}

ReconstructionCost::ReconstructionCost(const Waveform& y, const CompressionConfig& c, Eigen::Index estimate_length)
    : c_(c), length_(std::max(y.size(), estimate_length)), estimate_length_(estimate_length) {
  c_.validate();
  target_ = compress(stft(zero_pad(y, length_), c_.stft), c_.exponent);
  frames_ = static_cast<int>(target_.rows());
}

Waveform ReconstructionCost::padded(const Waveform& yhat) const {
  if (yhat.size() != estimate_length_)
    throw ShapeError("cost: estimate has " + std::to_string(yhat.size()) + " samples, expected " +
                     std::to_string(estimate_length_));
  return zero_pad(yhat, length_);
}

double ReconstructionCost::value(const Waveform& yhat) const {
  const ComplexSpectrogram b = compress(stft(padded(yhat), c_.stft), c_.exponent);
  return (b - target_).squaredNorm() / frames_;
}

double ReconstructionCost::value_and_gradient(const Waveform& yhat, Waveform& gradient) const {
  const ComplexSpectrogram S = stft(padded(yhat), c_.stft);
  const ComplexSpectrogram diff = compress(S, c_.exponent) - target_;
  const ComplexSpectrogram G = compress_vjp<double>(S, diff * (2.0 / frames_), c_.exponent);
  gradient = stft_adjoint(G, c_.stft, length_).head(estimate_length_);
  return diff.squaredNorm() / frames_;
}

RegularizerValue noise_regularizer(const RirParams& p, double sigma_prime, std::uint64_t seed,
                                   const OperatorConfig& op, const CompressionConfig& c) {
  if (!(sigma_prime >= 0.0)) throw ConfigError("noise_regularizer: sigma' must be >= 0");
  Waveform delta = Waveform::Zero(op.stft.window_length);
  delta[0] = 1.0;
  const Waveform h = apply_operator(delta, p, op);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Waveform target = h;
  for (Eigen::Index i = 0; i < target.size(); ++i) target[i] += sigma_prime * normal(rng);

  const ComplexSpectrogram S = stft(h, c.stft);
  const ComplexSpectrogram diff = compress(S, c.exponent) - compress(stft(target, c.stft), c.exponent);
  const double scale = 1.0 / op.n_frames;
  const ComplexSpectrogram G = compress_vjp<double>(S, diff * (2.0 * scale), c.exponent);
  const Waveform gh = stft_adjoint(G, c.stft, h.size());

  RegularizerValue r;
  r.value = diff.squaredNorm() * scale;
  r.gradient = operator_gradients(delta, p, op, gh).params;
  return r;
}

}  // namespace derev
