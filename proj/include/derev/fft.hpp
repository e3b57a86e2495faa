#pragma once

#include <unsupported/Eigen/FFT>

#include <complex>
#include <vector>

namespace derev {

// Real-input FFT of fixed size with reusable buffers. Not shareable across threads.
template <typename Scalar>
class RealFft {
 public:
  explicit RealFft(int n) : time(n, Scalar(0)), freq(n / 2 + 1), n_(n) {
    fft_.SetFlag(Eigen::FFT<Scalar>::HalfSpectrum);
  }

  int size() const { return n_; }
  int bins() const { return n_ / 2 + 1; }

  void forward() { fft_.fwd(freq, time); }

  // Imaginary parts at DC and Nyquist are ignored, so the result is always real.
  void inverse() { fft_.inv(time, freq, n_); }

  std::vector<Scalar> time;
  std::vector<std::complex<Scalar>> freq;

 private:
  int n_;
  Eigen::FFT<Scalar> fft_;
};

}  // namespace derev
