#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "derev/optim.hpp"
#include "derev/prior.hpp"
#include "derev/wpe.hpp"

namespace derev {

struct DiffusionSchedule {
  double t_max = 0.5;
  double t_min = 1e-4;
  int steps = 200;
  double rho = 10.0;
  std::vector<double> sigmas;
};

// sigma_n = (t_max^(1/rho) + n/(N-1) (t_min^(1/rho) - t_max^(1/rho)))^rho, endpoints pinned exactly.
DiffusionSchedule build_schedule(double t_max, double t_min, int steps, double rho);

enum class JacobianMode { Auto, Identity };

struct SamplerConfig {
  double s_churn = 50.0;
  double s_noise = 1.0;
  double s_tmin = 0.0;
  double s_tmax = std::numeric_limits<double>::infinity();
  int order = 2;
  double zeta_prime = 0.5;
  LikelihoodWeighting weighting = LikelihoodWeighting::NormNormalized;
  double zeta_constant = 1.0;
  bool rescale = true;
  double sigma_data = 0.05;
  // Standard deviation of the noise added to the warm start; negative means t_max.
  double init_noise = -1.0;
  JacobianMode jacobian = JacobianMode::Auto;
  std::uint64_t seed = 0;

  void validate() const;
};

struct InferenceConfig {
  OperatorConfig op;
  CompressionConfig compression;
  RirOptConfig rir;
  DiffusionSchedule schedule;
  SamplerConfig sampler;
  WpeConfig wpe;

  void validate() const;
};

struct StepDiagnostics {
  int step = 0;
  double sigma = 0.0;
  double sigma_hat = 0.0;
  double cost = 0.0;  // C(y, A(xhat0)) at the likelihood evaluation
  double regularizer = 0.0;
  double zeta = 0.0;
  double grad_norm = 0.0;
  bool rescale_degenerate = false;
};

struct InferenceResult {
  Waveform x0;
  std::optional<RirParams> psi;
  Waveform rir;  // response of the operator used by the likelihood, unit first sample
  std::vector<StepDiagnostics> steps;
  std::string jacobian;
  double initial_cost = 0.0;  // C(y, A(x_init)) under the initial operator
  double final_cost = 0.0;    // C(y, A(x_0)) under the final operator
};

struct LikelihoodScore {
  Waveform g;  // -zeta * grad_x C, the ascent direction of the log likelihood
  double cost = 0.0;
  double zeta = 0.0;
  double grad_norm = 0.0;
  bool rescale_degenerate = false;
};

// Evaluates the likelihood term at x given its precomputed prior score `s`.
LikelihoodScore likelihood_score(const Waveform& x, double sigma, const Waveform& s, ScoreModel& model,
                                 const Waveform& y, const ComplexSpectrogram& H, const InferenceConfig& cfg);

// Euler update x - sigma (sigma_next - sigma)(s + g).
Waveform sampler_step(const Waveform& x, double sigma, double sigma_next, const Waveform& s, const Waveform& g);

struct InferenceOptions {
  std::optional<Waveform> x_init;  // replaces the WPE warm start
  std::optional<RirParams> psi_init;
};

InferenceResult run_blind_inference(const Waveform& y, ScoreModel& model, const InferenceConfig& cfg,
                                    const InferenceOptions& options = {});
// h is a time-domain RIR; its first n_frames * hop samples define the fixed operator.
InferenceResult run_informed_inference(const Waveform& y, const Waveform& h, ScoreModel& model,
                                       const InferenceConfig& cfg, const InferenceOptions& options = {});

}  // namespace derev
