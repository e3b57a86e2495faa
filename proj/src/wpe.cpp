#include "derev/wpe.hpp"

#include <Eigen/Cholesky>
#include <cmath>

namespace derev {

WpeResult wpe_spectrogram(const ComplexSpectrogram& Y, const WpeConfig& cfg) {
  cfg.validate();
  const Eigen::Index T = Y.rows(), K = Y.cols();
  const int taps = cfg.taps, D = cfg.delay;
  if (T < taps + D) throw SizingError("wpe: need at least taps + delay frames");

  WpeResult result;
  result.spectrogram = Y;
  result.objective.assign(cfg.iterations, 0.0);

  Eigen::MatrixXcd delayed(T, taps);
  Eigen::VectorXcd y(T), d(T);
  Eigen::VectorXd lambda(T);
  for (Eigen::Index k = 0; k < K; ++k) {
    y = Y.col(k);
    delayed.setZero();
    for (int j = 0; j < taps; ++j) {
      const Eigen::Index shift = D + j;
      if (shift < T) delayed.col(j).tail(T - shift) = y.head(T - shift);
    }
    d = y;
    for (int it = 0; it < cfg.iterations; ++it) {
      lambda = d.cwiseAbs2().cwiseMax(cfg.variance_floor);
      const Eigen::VectorXd inv = lambda.cwiseInverse();
      const Eigen::MatrixXcd weighted = inv.asDiagonal() * delayed;
      Eigen::MatrixXcd R = weighted.adjoint() * delayed;
      const Eigen::VectorXcd r = weighted.adjoint() * y;
      const double trace = R.diagonal().real().sum();
      if (trace > 0.0) {
        R.diagonal().array() += cfg.loading * trace;
        const Eigen::VectorXcd G = R.ldlt().solve(r);
        d = y - delayed * G;
      } else {
        d = y;
      }
      result.objective[it] += (d.cwiseAbs2().cwiseProduct(inv)).sum() + lambda.array().log().sum();
    }
    result.spectrogram.col(k) = d;
  }
  return result;
}

Waveform wpe_dereverb(const Waveform& y, const WpeConfig& cfg) {
  cfg.validate();
  const ComplexSpectrogram Y = stft(y, cfg.stft);
  return istft(wpe_spectrogram(Y, cfg).spectrogram, cfg.stft, y.size());
}

}  // namespace derev
