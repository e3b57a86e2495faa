#include "derev/optim.hpp"

#include <numbers>

namespace derev {

AdamState::AdamState(const AdamConfig& cfg, const RirParams& like)
    : config(cfg), first_moment(RirParams::zeros_like(like)), second_moment(RirParams::zeros_like(like)) {}

void AdamState::reset() {
  first_moment = RirParams::zeros_like(first_moment);
  second_moment = RirParams::zeros_like(second_moment);
  step_count = 0;
}

namespace {

template <typename Dense>
void adam_update(Dense& p, Dense& m, Dense& v, const Dense& g, const AdamConfig& c, double bc1, double bc2) {
  m = c.beta1 * m + (1.0 - c.beta1) * g;
  v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
  p -= (c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps)).matrix();
}

double wrap_phase(double phi) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  return phi - two_pi * std::ceil((phi - std::numbers::pi) / two_pi);
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RirParams adam_step(AdamState& state, const RirParams& params, const RirParams& grads) {
  if (grads.weights_db.size() != params.weights_db.size() || grads.decays.size() != params.decays.size() ||
      grads.phases.rows() != params.phases.rows() || grads.phases.cols() != params.phases.cols())
    throw ShapeError("adam_step: gradient shape does not match parameters");
  if (!grads.weights_db.allFinite()) throw NumericalError("adam_step: non-finite gradient in band weights");
  if (!grads.decays.allFinite()) throw NumericalError("adam_step: non-finite gradient in band decays");
  if (!grads.phases.allFinite()) throw NumericalError("adam_step: non-finite gradient in phases");
  if (state.first_moment.weights_db.size() != params.weights_db.size() ||
      state.first_moment.phases.rows() != params.phases.rows() ||
      state.first_moment.phases.cols() != params.phases.cols())
    state = AdamState(state.config, params);

  state.step_count += 1;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  RirParams out = params;
  adam_update(out.weights_db, state.first_moment.weights_db, state.second_moment.weights_db, grads.weights_db, c, bc1,
              bc2);
  adam_update(out.decays, state.first_moment.decays, state.second_moment.decays, grads.decays, c, bc1, bc2);
  adam_update(out.phases, state.first_moment.phases, state.second_moment.phases, grads.phases, c, bc1, bc2);
  return out;
}

RirParams project_params(const RirParams& p, const ParamBounds& bounds) {
  RirParams out = p;
  out.weights_db = p.weights_db.cwiseMax(bounds.weight_db_min).cwiseMin(bounds.weight_db_max);
  out.decays = p.decays.cwiseMax(bounds.decay_min).cwiseMin(bounds.decay_max);
  out.phases = p.phases.unaryExpr(&wrap_phase);
  return out;
}

RirOptResult rir_opt_loop(const RirParams& init, const Waveform& xhat0, const Waveform& y, int n_its, double sigma,
                          AdamState& state, const RirOptConfig& cfg, const OperatorConfig& op,
                          const CompressionConfig& comp, std::uint64_t seed) {
  if (n_its < 0) throw ConfigError("rir_opt_loop: n_its must be >= 0");
  RirOptResult result;
  result.params = init;
  if (n_its == 0) return result;

  const Eigen::Index out_len = xhat0.size() + op.rir_length();
  const ReconstructionCost objective(y, comp, out_len);
  const ComplexSpectrogram X = stft(xhat0, op.stft);
  const int M = static_cast<int>(X.rows());
  const double sp = sigma_prime(sigma, cfg.regularizer);

  RirParams& p = result.params;
  Waveform g_out;
  for (int it = 0; it < n_its; ++it) {
    const ComplexSpectrogram H = assemble_rir(p, op);
    const Waveform yhat = overlap_add(subband_convolve(X, H), op.stft, out_len);
    const double c = objective.value_and_gradient(yhat, g_out);
    const ComplexSpectrogram GY = overlap_add_adjoint(g_out, op.stft, M + op.n_frames - 1);
    RirParams grad = params_gradient(p, op, subband_convolve_adjoint_h(X, GY, op.n_frames));

    double r = 0.0;
    if (cfg.use_regularizer) {
      RegularizerValue reg = noise_regularizer(p, sp, mix_seed(seed + static_cast<std::uint64_t>(it)), op, comp);
      r = reg.value;
      grad.weights_db += reg.gradient.weights_db;
      grad.decays += reg.gradient.decays;
      grad.phases += reg.gradient.phases;
    }
    result.trace.cost.push_back(c);
    result.trace.regularizer.push_back(r);

    p = project_params(adam_step(state, p, grad), cfg.bounds);
  }
  return result;
}

}  // namespace derev
