#pragma once

#include <cstdint>
#include <vector>

#include "derev/objective.hpp"

namespace derev {

struct AdamConfig {
  double lr = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("adam: lr must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("adam: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("adam: eps must be positive");
  }
};

struct AdamState {
  AdamConfig config;
  RirParams first_moment;
  RirParams second_moment;
  long step_count = 0;

  AdamState() = default;
  AdamState(const AdamConfig& cfg, const RirParams& like);
  void reset();
};

// One bias-corrected Adam update of all three parameter classes.
RirParams adam_step(AdamState& state, const RirParams& params, const RirParams& grads);

// Clamps weights and decays to the box and wraps phases to (-pi, pi].
RirParams project_params(const RirParams& p, const ParamBounds& bounds = {});

struct RirOptConfig {
  int iterations = 10;
  double init_weight_db = 0.0;
  double init_decay = 10.0;
  bool persist_moments = true;
  bool use_regularizer = true;
  ParamBounds bounds;
  AdamConfig adam;
  RegularizerSchedule regularizer;
};

struct RirOptTrace {
  std::vector<double> cost;
  std::vector<double> regularizer;
};

struct RirOptResult {
  RirParams params;
  RirOptTrace trace;
};

// Inner loop: Adam on C(y, A_psi(xhat0)) + R(psi). `seed` drives the regularizer's noise draws.
RirOptResult rir_opt_loop(const RirParams& init, const Waveform& xhat0, const Waveform& y, int n_its, double sigma,
                          AdamState& state, const RirOptConfig& cfg, const OperatorConfig& op,
                          const CompressionConfig& comp, std::uint64_t seed);

}  // namespace derev
