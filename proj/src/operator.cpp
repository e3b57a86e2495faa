#include "derev/operator.hpp"

#include <numbers>
#include <random>

namespace derev {

BandLayout BandLayout::standard(const StftConfig& stft) {
  BandLayout layout;
  const double bins_per_hz = static_cast<double>(stft.fft_size) / stft.sample_rate;
  auto add_region = [&](double lo, double hi, double step) {
    int count = 0;
    for (double f = lo; f <= hi + 1e-9; f += step, ++count) layout.center_bins.push_back(f * bins_per_hz);
    layout.counts.push_back(count);
  };
  add_region(125.0, 1000.0, 125.0);
  add_region(1250.0, 3000.0, 250.0);
  add_region(3500.0, 8000.0, 500.0);
  return layout;
}

BandLayout BandLayout::from_bins(std::vector<double> bins) {
  BandLayout layout;
  layout.counts.push_back(static_cast<int>(bins.size()));
  layout.center_bins = std::move(bins);
  return layout;
}

void BandLayout::validate(int bins) const {
  if (center_bins.empty()) throw ConfigError("band layout: no bands");
  if (size() >= bins) throw ConfigError("band layout: need fewer bands than frequency bins");
  if (center_bins.front() < 0.0 || center_bins.back() > bins - 1)
    throw ConfigError("band layout: centers must lie within [0, bins-1]");
  for (std::size_t b = 1; b < center_bins.size(); ++b)
    if (!(center_bins[b] > center_bins[b - 1])) throw ConfigError("band layout: centers must be strictly ascending");
}

void OperatorConfig::validate() const {
  stft.validate();
  if (n_frames < 1) throw ConfigError("operator: n_frames must be >= 1");
  bands.validate(bins());
}

Eigen::VectorXd RirParams::weights() const {
  return (weights_db.array() * (std::log(10.0) / 20.0)).exp().matrix();
}

RirParams RirParams::zeros_like(const RirParams& other) {
  RirParams z;
  z.weights_db = Eigen::VectorXd::Zero(other.weights_db.size());
  z.decays = Eigen::VectorXd::Zero(other.decays.size());
  z.phases = RealSpectrogram::Zero(other.phases.rows(), other.phases.cols());
  return z;
}

RirParams RirParams::initial(const OperatorConfig& cfg, double weight_db, double decay, std::uint64_t seed) {
  RirParams p;
  const int B = cfg.bands.size();
  p.weights_db = Eigen::VectorXd::Constant(B, weight_db);
  p.decays = Eigen::VectorXd::Constant(B, decay);
  p.phases.resize(cfg.n_frames, cfg.bins());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-std::numbers::pi, std::numbers::pi);
  for (Eigen::Index i = 0; i < p.phases.size(); ++i) p.phases.data()[i] = uniform(rng);
  return p;
}

namespace {

struct BandInterpolation {
  std::vector<int> lo, hi;
  std::vector<double> t;
};

BandInterpolation band_interpolation(const BandLayout& layout, int bins) {
  BandInterpolation w;
  w.lo.resize(bins);
  w.hi.resize(bins);
  w.t.resize(bins);
  const auto& c = layout.center_bins;
  const int B = layout.size();
  int b = 0;
  for (int k = 0; k < bins; ++k) {
    if (k <= c.front()) {
      w.lo[k] = w.hi[k] = 0;
      w.t[k] = 0.0;
    } else if (k >= c.back()) {
      w.lo[k] = w.hi[k] = B - 1;
      w.t[k] = 0.0;
    } else {
      while (c[b + 1] < k) ++b;
      w.lo[k] = b;
      w.hi[k] = b + 1;
      w.t[k] = (k - c[b]) / (c[b + 1] - c[b]);
    }
  }
  return w;
}

void check_params(const RirParams& p, const OperatorConfig& cfg) {
  const int B = cfg.bands.size();
  if (p.weights_db.size() != B || p.decays.size() != B)
    throw ShapeError("rir params: expected " + std::to_string(B) + " bands");
  if (p.phases.rows() != cfg.n_frames || p.phases.cols() != cfg.bins())
    throw ShapeError("rir params: phase matrix must be n_frames x bins");
}

RealSpectrogram log_magnitude(const RirParams& p, const OperatorConfig& cfg, const BandInterpolation& w) {
  const int Nh = cfg.n_frames, K = cfg.bins(), B = cfg.bands.size();
  const double c = std::log(10.0) / 20.0;
  RealSpectrogram band(Nh, B);
  for (int n = 0; n < Nh; ++n)
    for (int b = 0; b < B; ++b) band(n, b) = c * p.weights_db[b] - p.decays[b] * n;
  RealSpectrogram logA(Nh, K);
  for (int n = 0; n < Nh; ++n)
    for (int k = 0; k < K; ++k) logA(n, k) = (1.0 - w.t[k]) * band(n, w.lo[k]) + w.t[k] * band(n, w.hi[k]);
  return logA;
}

}  // namespace

RealSpectrogram magnitude_from_params(const RirParams& p, const OperatorConfig& cfg) {
  check_params(p, cfg);
  const auto w = band_interpolation(cfg.bands, cfg.bins());
  return log_magnitude(p, cfg, w).array().exp().matrix();
}

ComplexSpectrogram assemble_rir(const RirParams& p, const OperatorConfig& cfg) {
  const RealSpectrogram A = magnitude_from_params(p, cfg);
  ComplexSpectrogram H(A.rows(), A.cols());
  for (Eigen::Index i = 0; i < A.size(); ++i) H.data()[i] = std::polar(A.data()[i], p.phases.data()[i]);
  return H;
}

RirParams params_gradient(const RirParams& p, const OperatorConfig& cfg, const ComplexSpectrogram& GH) {
  check_params(p, cfg);
  const int Nh = cfg.n_frames, K = cfg.bins(), B = cfg.bands.size();
  if (GH.rows() != Nh || GH.cols() != K) throw ShapeError("params_gradient: cotangent shape mismatch");
  const auto w = band_interpolation(cfg.bands, K);
  const RealSpectrogram A = log_magnitude(p, cfg, w).array().exp().matrix();

  RirParams g = RirParams::zeros_like(p);
  RealSpectrogram g_band = RealSpectrogram::Zero(Nh, B);
  for (int n = 0; n < Nh; ++n) {
    for (int k = 0; k < K; ++k) {
      const std::complex<double> r = GH(n, k) * std::polar(1.0, -p.phases(n, k));
      g.phases(n, k) = A(n, k) * r.imag();
      const double g_log = r.real() * A(n, k);
      g_band(n, w.lo[k]) += (1.0 - w.t[k]) * g_log;
      g_band(n, w.hi[k]) += w.t[k] * g_log;
    }
  }
  const double c = std::log(10.0) / 20.0;
  for (int b = 0; b < B; ++b) {
    double gw = 0.0, ga = 0.0;
    for (int n = 0; n < Nh; ++n) {
      gw += g_band(n, b);
      ga -= n * g_band(n, b);
    }
    g.weights_db[b] = c * gw;
    g.decays[b] = ga;
  }
  return g;
}

ComplexSpectrogram subband_convolve(const ComplexSpectrogram& X, const ComplexSpectrogram& H) {
  if (X.cols() != H.cols())
    throw ShapeError("subband_convolve: X has " + std::to_string(X.cols()) + " bins, H has " +
                     std::to_string(H.cols()));
  const Eigen::Index M = X.rows(), Nh = H.rows();
  if (M == 0 || Nh == 0) throw ShapeError("subband_convolve: empty operand");
  ComplexSpectrogram Y = ComplexSpectrogram::Zero(M + Nh - 1, X.cols());
  for (Eigen::Index m = 0; m < Y.rows(); ++m) {
    const Eigen::Index n_lo = std::max<Eigen::Index>(0, m - M + 1), n_hi = std::min(Nh - 1, m);
    for (Eigen::Index n = n_lo; n <= n_hi; ++n) Y.row(m) += H.row(n).cwiseProduct(X.row(m - n));
  }
  return Y;
}

ComplexSpectrogram subband_convolve_adjoint_x(const ComplexSpectrogram& H, const ComplexSpectrogram& GY, int frames) {
  const Eigen::Index Nh = H.rows();
  if (GY.rows() != frames + Nh - 1 || GY.cols() != H.cols())
    throw ShapeError("subband_convolve_adjoint_x: cotangent shape mismatch");
  ComplexSpectrogram GX = ComplexSpectrogram::Zero(frames, H.cols());
  for (Eigen::Index m = 0; m < frames; ++m)
    for (Eigen::Index n = 0; n < Nh; ++n) GX.row(m) += H.row(n).conjugate().cwiseProduct(GY.row(m + n));
  return GX;
}

ComplexSpectrogram subband_convolve_adjoint_h(const ComplexSpectrogram& X, const ComplexSpectrogram& GY, int n_frames) {
  const Eigen::Index M = X.rows();
  if (GY.rows() != M + n_frames - 1 || GY.cols() != X.cols())
    throw ShapeError("subband_convolve_adjoint_h: cotangent shape mismatch");
  ComplexSpectrogram GH = ComplexSpectrogram::Zero(n_frames, X.cols());
  for (Eigen::Index n = 0; n < n_frames; ++n)
    for (Eigen::Index m = 0; m < M; ++m) GH.row(n) += X.row(m).conjugate().cwiseProduct(GY.row(m + n));
  return GH;
}

ComplexSpectrogram rir_analysis(const Waveform& h, const OperatorConfig& cfg) {
  const int hop = cfg.stft.hop, Nh = cfg.n_frames;
  ComplexSpectrogram H(Nh, cfg.bins());
  RealFft<double> fft(cfg.stft.fft_size);
  for (int n = 0; n < Nh; ++n) {
    std::fill(fft.time.begin(), fft.time.end(), 0.0);
    for (int j = 0; j < hop; ++j) {
      const Eigen::Index i = static_cast<Eigen::Index>(n) * hop + j;
      if (i < h.size()) fft.time[j] = h[i];
    }
    fft.forward();
    for (int k = 0; k < cfg.bins(); ++k) H(n, k) = fft.freq[k];
  }
  return H;
}

Waveform rir_synthesis(const ComplexSpectrogram& H, const OperatorConfig& cfg) {
  if (H.cols() != cfg.bins()) throw ShapeError("rir_synthesis: bin count mismatch");
  const int hop = cfg.stft.hop;
  Waveform h(H.rows() * hop);
  RealFft<double> fft(cfg.stft.fft_size);
  for (Eigen::Index n = 0; n < H.rows(); ++n) {
    for (int k = 0; k < cfg.bins(); ++k) fft.freq[k] = H(n, k);
    fft.inverse();
    for (int j = 0; j < hop; ++j) h[n * hop + j] = fft.time[j];
  }
  return h;
}

ComplexSpectrogram apply_projection(const ComplexSpectrogram& H, const OperatorConfig& cfg) {
  if (H.rows() != cfg.n_frames) throw ShapeError("apply_projection: H must have n_frames frames");
  Waveform h = min_phase_project(rir_synthesis(H, cfg));
  h[0] = 1.0;
  return rir_analysis(h, cfg);
}

Waveform apply_operator(const Waveform& x, const ComplexSpectrogram& H, const OperatorConfig& cfg) {
  if (H.rows() != cfg.n_frames || H.cols() != cfg.bins()) throw ShapeError("apply_operator: kernel shape mismatch");
  const ComplexSpectrogram Y = subband_convolve(stft(x, cfg.stft), H);
  return overlap_add(Y, cfg.stft, x.size() + cfg.rir_length());
}

Waveform apply_operator(const Waveform& x, const RirParams& p, const OperatorConfig& cfg) {
  return apply_operator(x, assemble_rir(p, cfg), cfg);
}

Waveform impulse_response(const ComplexSpectrogram& H, const OperatorConfig& cfg) {
  Waveform delta = Waveform::Zero(cfg.stft.window_length);
  delta[0] = 1.0;
  return apply_operator(delta, H, cfg);
}

Waveform operator_adjoint_x(const ComplexSpectrogram& H, const OperatorConfig& cfg, const Waveform& cotangent,
                            Eigen::Index input_length) {
  const int M = cfg.stft.frames_for(input_length);
  const ComplexSpectrogram GY = overlap_add_adjoint(cotangent, cfg.stft, M + cfg.n_frames - 1);
  return stft_adjoint(subband_convolve_adjoint_x(H, GY, M), cfg.stft, input_length);
}

OperatorGradients operator_gradients(const Waveform& x, const RirParams& p, const OperatorConfig& cfg,
                                     const Waveform& cotangent) {
  if (cotangent.size() != x.size() + cfg.rir_length()) throw ShapeError("operator_gradients: cotangent length mismatch");
  const ComplexSpectrogram X = stft(x, cfg.stft);
  const ComplexSpectrogram H = assemble_rir(p, cfg);
  const int M = static_cast<int>(X.rows());
  const ComplexSpectrogram GY = overlap_add_adjoint(cotangent, cfg.stft, M + cfg.n_frames - 1);
  OperatorGradients g;
  g.x = stft_adjoint(subband_convolve_adjoint_x(H, GY, M), cfg.stft, x.size());
  g.params = params_gradient(p, cfg, subband_convolve_adjoint_h(X, GY, cfg.n_frames));
  return g;
}

}  // namespace derev
