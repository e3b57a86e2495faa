#pragma once

#include <memory>
#include <string>

#include "derev/types.hpp"

namespace derev {

// Score of the noise-smoothed data density, grad log p_sigma(x).
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;

  virtual Waveform score(const Waveform& x, double sigma) = 0;
  virtual std::string name() const = 0;

  // Models that expose their Jacobian let the sampler differentiate through the denoiser.
  virtual bool has_jacobian() const { return false; }
  // (d score / d x)^T v
  virtual Waveform score_vjp(const Waveform& x, double sigma, const Waveform& v);
};

// Independent Gaussian per sample; its smoothed score is available in closed form.
class GaussianPrior : public ScoreModel {
 public:
  GaussianPrior(Waveform mean, Waveform variances);
  GaussianPrior(Waveform mean, double variance);

  Waveform score(const Waveform& x, double sigma) override;
  std::string name() const override { return "gaussian"; }
  bool has_jacobian() const override { return true; }
  Waveform score_vjp(const Waveform& x, double sigma, const Waveform& v) override;

  const Waveform& mean() const { return mean_; }
  const Waveform& variances() const { return variances_; }

 private:
  Waveform mean_;
  Waveform variances_;
};

class ZeroScoreModel : public ScoreModel {
 public:
  Waveform score(const Waveform& x, double) override { return Waveform::Zero(x.size()); }
  std::string name() const override { return "zero"; }
  bool has_jacobian() const override { return true; }
  Waveform score_vjp(const Waveform& x, double, const Waveform&) override { return Waveform::Zero(x.size()); }
};

Waveform gaussian_score(const GaussianPrior& g, const Waveform& x, double sigma);

// Tweedie estimate of the clean signal: x + sigma^2 * score(x, sigma).
Waveform denoise_one_step(const Waveform& x, double sigma, ScoreModel& model);

struct Rescaled {
  Waveform value;
  double gain = 1.0;
  bool degenerate = false;  // input had zero spread and was returned unchanged
};

Rescaled rescale_estimate(const Waveform& x, double sigma_data);
// Pulls a cotangent on rescale_estimate(x) back to x.
Waveform rescale_vjp(const Waveform& x, double sigma_data, const Waveform& cotangent);

}  // namespace derev
