#include "derev/prior.hpp"

#include <cmath>

namespace derev {

Waveform ScoreModel::score_vjp(const Waveform&, double, const Waveform&) {
  throw Error("score model '" + name() + "' does not expose its Jacobian");
}

GaussianPrior::GaussianPrior(Waveform mean, Waveform variances)
    : mean_(std::move(mean)), variances_(std::move(variances)) {
  if (mean_.size() != variances_.size()) throw ShapeError("gaussian prior: mean and variances differ in length");
  if (!(variances_.array() > 0.0).all()) throw ConfigError("gaussian prior: variances must be positive");
}

GaussianPrior::GaussianPrior(Waveform mean, double variance)
    : GaussianPrior(mean, Waveform::Constant(mean.size(), variance)) {}

Waveform gaussian_score(const GaussianPrior& g, const Waveform& x, double sigma) {
  if (x.size() != g.mean().size())
    throw ShapeError("gaussian prior: input has " + std::to_string(x.size()) + " samples, prior has " +
                     std::to_string(g.mean().size()));
  return -((x - g.mean()).array() / (g.variances().array() + sigma * sigma)).matrix();
}

Waveform GaussianPrior::score(const Waveform& x, double sigma) { return gaussian_score(*this, x, sigma); }

Waveform GaussianPrior::score_vjp(const Waveform& x, double sigma, const Waveform& v) {
  if (x.size() != mean_.size() || v.size() != mean_.size()) throw ShapeError("gaussian prior: length mismatch");
  return -(v.array() / (variances_.array() + sigma * sigma)).matrix();
}

Waveform denoise_one_step(const Waveform& x, double sigma, ScoreModel& model) {
  if (!(sigma >= 0.0)) throw ConfigError("denoise_one_step: sigma must be >= 0");
  if (sigma == 0.0) return x;
  const Waveform s = model.score(x, sigma);
  if (s.size() != x.size()) throw ShapeError("denoise_one_step: score length differs from input");
  return x + sigma * sigma * s;
}

namespace {

double population_std(const Waveform& x) {
  if (x.size() == 0) return 0.0;
  const double mean = x.mean();
  return std::sqrt((x.array() - mean).square().sum() / static_cast<double>(x.size()));
}

}  // namespace

Rescaled rescale_estimate(const Waveform& x, double sigma_data) {
  Rescaled r;
  const double sd = population_std(x);
  if (!(sd > 0.0) || !std::isfinite(sd)) {
    r.value = x;
    r.degenerate = true;
    return r;
  }
  r.gain = sigma_data / sd;
  r.value = x * r.gain;
  return r;
}

Waveform rescale_vjp(const Waveform& x, double sigma_data, const Waveform& cotangent) {
  const double sd = population_std(x);
  if (!(sd > 0.0) || !std::isfinite(sd)) return cotangent;
  const double L = static_cast<double>(x.size());
  const double gain = sigma_data / sd;
  const double xg = x.dot(cotangent);
  return gain * cotangent - (gain / sd) * xg / (L * sd) * (x.array() - x.mean()).matrix();
}

}  // namespace derev
